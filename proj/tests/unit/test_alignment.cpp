#include <doctest.h>

#include <regex>

#include "chronoforge/alignment.hpp"
#include "chronoforge/metrics.hpp"
#include "chronoforge/prompting.hpp"
#include "chronoforge/stub_oracle.hpp"
#include "chronoforge/toml.hpp"
#include "support.hpp"

using namespace chronoforge;
using testsupport::question;

namespace {

std::shared_ptr<Dataset> league_dataset() {
    auto ds = std::make_shared<Dataset>();
    ds->questions = {
        question("europa", "Which team won the UEFA Europa League?",
                 {{"Chelsea", 2019, 2019}, {"Sevilla", 2020, 2020}, {"Villarreal", 2021, 2021}, {"Eintracht Frankfurt", 2022, 2022}, {"Sevilla", 2023, std::nullopt}}),
        question("stable", "Who founded the Stable Club?", {{"Ana Stable", 1990, std::nullopt}}),
        question("changed", "Who leads the Changed Council?", {{"Old Leader", 2000, 2019}, {"New Leader", 2020, std::nullopt}}),
        question("late", "Who won the Late Prize?", {{"Late Winner", 2021, std::nullopt}}),
        question("pair", "Who co-chairs the Pair Board?", {{"Zed Chair", 2005, std::nullopt}, {"Abe Chair", 2005, std::nullopt}}),
    };
    return ds;
}

std::vector<const TemporalQuestion*> all(const Dataset& ds) {
    std::vector<const TemporalQuestion*> out;
    for (const auto& q : ds.questions) out.push_back(&q);
    return out;
}

class FailingClient : public ModelClient {
public:
    CompletionResult complete(const CompletionRequest&) override { throw TransportError("down"); }
};

class NoLogprobClient : public StubOracle {
public:
    using StubOracle::StubOracle;
    bool supports_logprobs() const override { return false; }
};

}  // namespace

TEST_CASE("score_correctness with the stub") {
    auto ds = league_dataset();
    AlignmentConfig cfg;
    StubOracle stub(ds, {2022, 0.0, 1});
    CHECK(score_correctness(stub, *ds->find("europa"), 2022, cfg) == std::optional<double>(1.0));
    StubOracle noisy(ds, {2022, 1.0, 1});
    CHECK(score_correctness(noisy, *ds->find("europa"), 2022, cfg) == std::optional<double>(0.0));
    StubOracle frozen(ds, {2019, 0.0, 1});
    const auto& changed = *ds->find("changed");
    CHECK(score_correctness(frozen, changed, 2022, cfg) == std::optional<double>(token_f1("Old Leader", "New Leader")));
    FailingClient down;
    CHECK_FALSE(score_correctness(down, changed, 2022, cfg).has_value());
    CHECK(scoring_prompt(changed, 2022).ends_with("Who leads the Changed Council?\nAs of year 2022, the answer is:"));
}

TEST_CASE("select_training strategies") {
    auto ds = league_dataset();
    auto train = all(*ds);
    StubOracle stub(ds, {2019, 0.0, 1});
    AlignmentConfig cfg;
    cfg.target_year = 2022;
    cfg.select_k = 2;
    SelectionInputs in;
    in.correctness = score_all(stub, train, 2022, cfg);
    CHECK(in.correctness.at("stable") == std::optional<double>(1.0));
    CHECK(in.correctness.at("late") == std::optional<double>(0.0));

    auto top = select_training(train, in, cfg);
    CHECK(top == std::vector<std::string>{"pair", "stable"});

    cfg.strategy = SelectionStrategy::random;
    cfg.seed = 4;
    auto r1 = select_training(train, in, cfg);
    auto r2 = select_training(train, in, cfg);
    CHECK(r1 == r2);
    CHECK(r1.size() == 2);
    CHECK(std::is_sorted(r1.begin(), r1.end()));

    cfg.strategy = SelectionStrategy::popularity;
    auto withpop = *ds;
    for (std::size_t i = 0; i < withpop.questions.size(); ++i) withpop.questions[i].popularity = 10.0 * static_cast<double>(i);
    auto pop = select_training(all(withpop), in, cfg);
    CHECK(pop == std::vector<std::string>{"pair", "late"});

    cfg.strategy = SelectionStrategy::confidence;
    in.confidence = confidence_all(stub, train, 2022, cfg);
    auto conf = select_training(train, in, cfg);
    CHECK(conf.size() == 2);
    CHECK(std::find(conf.begin(), conf.end(), "late") == conf.end());
    CHECK(*in.confidence.at(conf[0]) >= *in.confidence.at(conf[1]));
    NoLogprobClient blind(ds, {2019, 0.0, 1});
    CHECK_THROWS_AS(greedy_confidence(blind, *ds->find("stable"), 2022, cfg), CapabilityError);

    cfg.select_k = 99;
    CHECK_THROWS_AS(select_training(train, in, cfg), SizingError);
}

TEST_CASE("assign_adaptive_year") {
    auto ds = league_dataset();
    AlignmentConfig cfg;
    StubOracle frozen(ds, {2019, 0.0, 1});
    CHECK(assign_adaptive_year(frozen, *ds->find("changed"), cfg) == std::optional<Year>(2019));
    StubOracle current(ds, {2022, 0.0, 1});
    CHECK(assign_adaptive_year(current, *ds->find("changed"), cfg) == std::optional<Year>(2022));
    StubOracle noisy(ds, {2022, 1.0, 1});
    CHECK_FALSE(assign_adaptive_year(noisy, *ds->find("changed"), cfg).has_value());
    CHECK_FALSE(assign_adaptive_year(frozen, *ds->find("late"), cfg).has_value());

    auto assigned = assign_all(frozen, all(*ds), cfg);
    for (const auto& [id, year] : assigned) {
        if (!year) continue;
        const auto& q = *ds->find(id);
        CHECK_FALSE(answers_at(q, *year).empty());
        CHECK(score_correctness(frozen, q, *year, cfg).value() > cfg.adaptive_threshold);
    }
}

TEST_CASE("emit_target_year") {
    auto ds = league_dataset();
    EmitReport report;
    auto ex = emit_target_year({"europa", "pair", "late", "missing", "europa"}, *ds, 2022, &report);
    REQUIRE(ex.size() == 3);
    CHECK(ex[0].id == "europa");
    CHECK(ex[0].prompt == read_file(testsupport::fixture("prompts/target_year_prompt.txt")));
    CHECK(ex[0].completion == read_file(testsupport::fixture("prompts/target_year_completion.txt")));
    CHECK(ex[0].loss_mask == LossMask::answer_only);
    CHECK_FALSE(ex[0].assigned_year.has_value());
    CHECK(ex[2].completion == "Abe Chair");
    CHECK(report.skipped == std::vector<std::string>{"missing"});

    const std::regex year(R"(\b(1[0-9]{3}|20[0-9]{2})\b)");
    for (const auto& e : ex) {
        CHECK_FALSE(std::regex_search(e.prompt, year));
        CHECK_FALSE(std::regex_search(e.completion, year));
    }

    auto old = emit_target_year({"changed"}, *ds, 2010);
    REQUIRE(old.size() == 1);
    CHECK(old[0].completion == "Old Leader");
}

TEST_CASE("emit_adaptive") {
    auto ds = league_dataset();
    std::map<std::string, std::optional<Year>> assignments = {{"europa", 2022}, {"late", std::nullopt}, {"changed", 2019}};
    auto ex = emit_adaptive(assignments, *ds);
    REQUIRE(ex.size() == 2);
    CHECK(ex[1].id == "europa");
    CHECK(ex[1].prompt == read_file(testsupport::fixture("prompts/adaptive_prompt.txt")));
    CHECK(ex[1].completion == read_file(testsupport::fixture("prompts/adaptive_completion.txt")));
    CHECK(ex[1].loss_mask == LossMask::full_output);
    CHECK(ex[1].assigned_year == std::optional<Year>(2022));
    for (const auto& e : ex) {
        auto parsed = parse_adaptive_completion(e.completion);
        REQUIRE(parsed);
        CHECK(parsed->first == *e.assigned_year);
        CHECK(answers_at(*ds->find(e.id), parsed->first).count(parsed->second));
    }
    CHECK_THROWS_AS(emit_adaptive({{"late", 2010}}, *ds), std::logic_error);
}

TEST_CASE("training JSONL contract") {
    TrainingExample a{"q1", "Answer the following question: Q?\nThe answer is:", "A", LossMask::answer_only, std::nullopt};
    TrainingExample b{"q2", "Answer the following question: Q?\n", "Based on my latest knowledge for this question from year 2020, the answer is: B",
                      LossMask::full_output, 2020};
    auto text = examples_to_jsonl({a, b});
    auto first = text.substr(0, text.find('\n'));
    CHECK(first == R"({"prompt":"Answer the following question: Q?\nThe answer is:","completion":"A","loss_mask":"answer_only","assigned_year":null,"id":"q1"})");
    auto back = examples_from_jsonl(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == a);
    CHECK(back[1] == b);
    CHECK_THROWS(examples_from_jsonl(R"({"prompt":"p","completion":"c","loss_mask":"everything","assigned_year":null,"id":"x"})"));
}

TEST_CASE("hyperparameter config") {
    HyperParams hp;
    auto text = emit_hparams(hp);
    CHECK(text.find("learning_rate = 5e-06\n") != std::string::npos);
    CHECK(text.find("epochs = 2\n") != std::string::npos);
    CHECK(text.find("max_seq_len = 128\n") != std::string::npos);
    CHECK(text.find("# ") == 0);
    CHECK(parse_hparams(text) == hp);
    auto parsed = parse_toml(text);
    CHECK(parsed["learning_rate"].get<double>() == 5e-6);
    CHECK(parsed["precision"] == "bfloat16");
    CHECK_THROWS(parse_hparams("epochs = 0\n"));
}
