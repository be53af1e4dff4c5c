#include <doctest.h>

#include "chronoforge/eval_harness.hpp"
#include "chronoforge/stub_oracle.hpp"
#include "chronoforge/synthetic.hpp"
#include "support.hpp"

using namespace chronoforge;
using testsupport::question;

namespace {

std::shared_ptr<Dataset> keeper_dataset() {
    auto ds = std::make_shared<Dataset>();
    ds->questions = {
        question("keeper", "Who won the goalkeeper award?",
                 {{"Gianluigi Buffon", 2000, 2013}, {"Iker Casillas", 2014, 2014}, {"Manuel Neuer", 2015, std::nullopt}}),
        question("late", "Who won the late award?", {{"Early Person", 2000, 2020}, {"Recent Person", 2021, std::nullopt}}),
        question("same", "Who chairs the same board?", {{"Same Chair", 2000, std::nullopt}}),
        question("swap", "Who holds the swap title?",
                 {{"First Holder", 2000, 2019}, {"Second Holder", 2020, 2020}, {"Third Holder", 2021, std::nullopt}}),
    };
    ds->questions[0].popularity = 10;
    ds->questions[1].popularity = 1000;
    ds->questions[2].popularity = 100000;
    return ds;
}

std::vector<const TemporalQuestion*> all(const Dataset& ds) {
    std::vector<const TemporalQuestion*> out;
    for (const auto& q : ds.questions) out.push_back(&q);
    return out;
}

EvalRecord scored(const std::string& id, const std::string& pred, const Dataset& ds, Year target) {
    EvalConfig cfg;
    EvalRecord r;
    r.id = id;
    r.prediction = pred;
    r.raw_output = pred;
    const auto& q = *ds.find(id);
    r.year_scores = score_prediction(pred, q, cfg.metrics, {target});
    auto c = categorize(pred, q, target, 0.8, cfg.metrics);
    r.category = c.category;
    r.hit_years = c.hit_years;
    return r;
}

}  // namespace

TEST_CASE("categorize") {
    auto ds = keeper_dataset();
    MetricConfig m;
    const auto& q = *ds->find("keeper");
    auto correct = categorize("Manuel Neuer", q, 2022, 0.8, m);
    CHECK(correct.category == Category::correct);
    CHECK(correct.hit_years.count(2022));
    auto misaligned = categorize("Iker Casillas", q, 2022, 0.8, m);
    CHECK(misaligned.category == Category::misaligned);
    CHECK(misaligned.hit_years == std::set<Year>{2014});
    CHECK(categorize(std::string(kUnknownEntity), q, 2022, 0.8, m).category == Category::incorrect);
    CHECK(categorize("Neuer", q, 2022, 0.8, m).category == Category::incorrect);
    CHECK(categorize("the Manuel Neuer!", q, 2022, 0.8, m).category == Category::correct);
}

TEST_CASE("run_eval with the stub") {
    auto ds = keeper_dataset();
    StubOracle stub(ds, {2019, 0.0, 1});
    EvalConfig cfg;
    cfg.strategy = strategy_from_name("insensitive", std::nullopt);
    cfg.shots = fixture_shots(ExampleKind::time_insensitive);
    cfg.target_year = 2022;
    auto split = all(*ds);
    std::reverse(split.begin(), split.end());
    auto records = run_eval(stub, split, cfg);
    REQUIRE(records.size() == 4);
    CHECK(std::is_sorted(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; }));
    for (const auto& r : records) {
        CHECK(r.year_scores.scores.at(2019) == 1.0);
        CHECK(r.hit_years.count(2019));
        CHECK((r.category == Category::correct) == r.hit_years.count(2022));
        if (r.category == Category::misaligned) CHECK(r.year_scores.f_max >= 0.8);
    }
    CHECK(records_to_jsonl(records) == records_to_jsonl(run_eval(stub, split, cfg)));
    auto back = records_from_jsonl(records_to_jsonl(records));
    CHECK(records_to_jsonl(back) == records_to_jsonl(records));
    CHECK_THROWS_AS(run_eval(stub, {}, cfg), std::invalid_argument);

    EvalConfig adaptive = cfg;
    adaptive.format = PromptFormat::adaptive;
    CHECK(adaptive.extract_mode() == ExtractMode::after_marker);
    auto ad = run_eval(stub, split, adaptive);
    for (const auto& r : ad) {
        CHECK_FALSE(r.marker_missing);
        CHECK(r.year_scores.scores.at(2019) == 1.0);
    }
}

TEST_CASE("run_eval marks transport failures") {
    class Flaky : public ModelClient {
    public:
        CompletionResult complete(const CompletionRequest& req) override {
            if (req.prompt.find("late award") != std::string::npos) throw TransportError("down");
            return {{" Same Chair"}, {std::nullopt}};
        }
    } flaky;
    auto ds = keeper_dataset();
    EvalConfig cfg;
    auto records = run_eval(flaky, all(*ds), cfg);
    std::size_t failed = 0;
    for (const auto& r : records) failed += r.failed;
    CHECK(failed == 1);
    auto agg = aggregate_records(records);
    CHECK(agg.count == 3);
}

TEST_CASE("cross tab sums match category totals") {
    auto ds = keeper_dataset();
    std::vector<EvalRecord> base = {scored("keeper", "Iker Casillas", *ds, 2022), scored("late", "Early Person", *ds, 2022),
                                    scored("same", "nobody", *ds, 2022), scored("swap", "Third Holder", *ds, 2022)};
    std::vector<EvalRecord> run = {scored("keeper", "Manuel Neuer", *ds, 2022), scored("late", "Recent Person", *ds, 2022),
                                   scored("same", "Same Chair", *ds, 2022), scored("swap", "First Holder", *ds, 2022)};
    auto tab = cross_tab(base, run);
    CHECK(tab.total() == 4);
    CHECK(tab.cells[Category::misaligned][Category::correct] == 2);
    CHECK(tab.cells[Category::incorrect][Category::correct] == 1);
    CHECK(tab.cells[Category::correct][Category::misaligned] == 1);
    for (Category b : {Category::correct, Category::misaligned, Category::incorrect}) {
        std::size_t row = 0, col = 0, base_total = 0, run_total = 0;
        for (Category r : {Category::correct, Category::misaligned, Category::incorrect}) {
            row += tab.cells[b][r];
            col += tab.cells[r][b];
        }
        for (const auto& rec : base) base_total += rec.category == b;
        for (const auto& rec : run) run_total += rec.category == b;
        CHECK(row == base_total);
        CHECK(col == run_total);
    }
}

TEST_CASE("earliest correct grouping") {
    auto ds = keeper_dataset();
    std::vector<EvalRecord> recs = {scored("late", "Recent Person", *ds, 2022), scored("same", "Same Chair", *ds, 2022),
                                    scored("swap", "Third Holder", *ds, 2022), scored("keeper", "Manuel Neuer", *ds, 2022)};
    auto g = earliest_correct_grouping(recs, *ds, 2022);
    // "late" keeps its 2019 answer through 2020, so the window excludes it
    CHECK(g.subset_size == 1);
    CHECK(g.correct == 1);
    CHECK(g.histogram == std::map<Year, std::size_t>{{2021, 1}});
    std::size_t sum = 0;
    for (const auto& [y, n] : g.histogram) sum += n;
    CHECK(sum == g.correct);
}

TEST_CASE("popularity buckets") {
    auto ds = keeper_dataset();
    std::vector<EvalRecord> run = {scored("keeper", "Manuel Neuer", *ds, 2022), scored("late", "nobody", *ds, 2022),
                                   scored("same", "Same Chair", *ds, 2022), scored("swap", "Third Holder", *ds, 2022)};
    auto one = popularity_buckets(run, *ds, 1, 2022);
    REQUIRE(one.buckets.size() == 1);
    CHECK(one.buckets[0].mean_f1 == doctest::Approx(2.0 / 3.0));
    CHECK(one.missing_popularity == 1);

    std::vector<EvalRecord> base = {scored("keeper", "nobody", *ds, 2022), scored("late", "nobody", *ds, 2022),
                                    scored("same", "Same Chair", *ds, 2022)};
    auto two = popularity_buckets(run, *ds, 3, 2022, &base);
    REQUIRE(two.buckets.size() == 3);
    CHECK(two.buckets[0].delta == std::optional<double>(1.0));
    CHECK(two.buckets[2].delta == std::optional<double>(0.0));
    CHECK(two.buckets[0].hi <= two.buckets[1].lo);
}

TEST_CASE("report output") {
    auto ds = keeper_dataset();
    std::vector<EvalRecord> run = {scored("keeper", "Manuel Neuer", *ds, 2022), scored("late", "Early Person", *ds, 2022)};
    auto rep = build_report("run", run, *ds, 2022, 0.8, 2);
    CHECK(rep.categories[Category::correct] + rep.categories[Category::misaligned] + rep.categories[Category::incorrect] == 2);
    auto csv_text = report_csv(rep);
    CHECK(csv_text.rfind("section,key,value,baseline,delta\n", 0) == 0);
    CHECK(csv_text.find("curve,2000,") != std::string::npos);
    CHECK(csv_text.find("curve,2023,") != std::string::npos);
    auto plot = plot_data({rep}, {{"decoding", "greedy"}});
    CHECK(plot.dump() == plot_data({rep}, {{"decoding", "greedy"}}).dump());
}

TEST_CASE("stub knowledge peak on a small synthetic set") {
    SyntheticDatasetConfig scfg;
    scfg.questions = 60;
    auto ds = std::make_shared<Dataset>();
    ds->questions = synthetic_questions(scfg);
    StubOracle stub(ds, {2015, 0.0, 1});
    EvalConfig cfg;
    cfg.strategy = strategy_from_name("insensitive", std::nullopt);
    auto records = run_eval(stub, all(*ds), cfg);
    CHECK(curve_argmax(aggregate_records(records).mean_curve) == 2015);
}
