#include <doctest.h>

#include <random>

#include "chronoforge/curation.hpp"
#include "support.hpp"

using namespace chronoforge;
using testsupport::question;

namespace {

TemporalTable inline_table(const std::string& csv_text) {
    auto t = table_from_csv(csv_text, RaggedPolicy::pad);
    REQUIRE(t);
    t->table_id = "T/table_0";
    t->page_title = "T";
    return {*t, detect_temporal_columns(*t)};
}

std::vector<TemporalQuestion> background() {
    const std::vector<std::string> texts = {
        "Who won the Champions League?", "Which club won the Premier League?", "Who is the mayor of London?",
        "What is the tallest building in the world?", "Who is the Prime Minister of the United Kingdom?",
        "Who coached the Boston Celtics?", "Which film earned the most money worldwide?",
        "Who is the chief justice of the Supreme Court?", "Who holds the marathon world record?",
        "Which country hosted the Olympic Games?"};
    std::vector<TemporalQuestion> qs;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        qs.push_back(question("bg" + std::to_string(i), texts[i], {{"Answer" + std::to_string(i), 2000, std::nullopt}}));
    }
    return qs;
}

}  // namespace

TEST_CASE("extract_answers with succession and shared periods") {
    auto nba = inline_table("Year,Finals MVP\n2000,Shaquille O'Neal\n2010,Kobe Bryant\n2019,Kawhi Leonard\n2023,Nikola Jokić\n");
    auto spec = primary_temporal_spec(nba.specs);
    REQUIRE(spec);
    ExtractionStats stats;
    auto answers = extract_answers(nba.table, *spec, 1, true, &stats);
    CHECK(stats.succession_extended);
    std::vector<TimedAnswer> expected = {{"Shaquille O'Neal", 2000, 2009},
                                         {"Kobe Bryant", 2010, 2018},
                                         {"Kawhi Leonard", 2019, 2022},
                                         {"Nikola Jokić", 2023, std::nullopt}};
    CHECK(answers == expected);

    auto pratt = inline_table("Year,Title\n2009,Bride Wars\n2009,Jennifer's Body\n2009,Deep in the Valley\n2009,Wild Hogs\n2011,Moneyball\n");
    spec = primary_temporal_spec(pratt.specs);
    REQUIRE(spec);
    auto films = extract_answers(pratt.table, *spec, 1, true);
    auto q = question("p", "?", {});
    q.answers = films;
    CHECK(answers_at(q, 2009).size() == 4);
    CHECK(answers_at(q, 2010).empty());

    auto service = inline_table("Name,Began active service,Ended active service\nA,2001,2010\nB,2011,Incumbent\n");
    spec = primary_temporal_spec(service.specs);
    REQUIRE(spec);
    auto held = extract_answers(service.table, *spec, 0, true);
    std::vector<TimedAnswer> verbatim = {{"A", 2001, 2010}, {"B", 2011, std::nullopt}};
    CHECK(held == verbatim);
}

TEST_CASE("merge_answers joins touching same-text spans") {
    auto merged = merge_answers({{"A", 2000, 2001}, {"A", 2002, 2003}, {"B", 2004, 2004}, {"A", 2006, std::nullopt}, {"A", 2007, 2008}});
    std::vector<TimedAnswer> expected = {{"A", 2000, 2003}, {"B", 2004, 2004}, {"A", 2006, std::nullopt}};
    CHECK(merged == expected);
}

TEST_CASE("clean_answer") {
    CHECK_FALSE(clean_answer("TBA").has_value());
    CHECK_FALSE(clean_answer("N/A").has_value());
    CHECK_FALSE(clean_answer("  tbd ").has_value());
    CHECK_FALSE(clean_answer("{{n/a}}").has_value());
    CHECK(clean_answer("POR José Mourinho") == std::optional<std::string>("José Mourinho"));
    CHECK(clean_answer("Paris") == std::optional<std::string>("Paris"));
    CHECK(clean_answer("AC Milan") == std::optional<std::string>("AC Milan"));
    CHECK(clean_answer("USA") == std::optional<std::string>("USA"));
    CHECK(clean_answer("<b>Real   Madrid</b>{{flagicon|ESP}}") == std::optional<std::string>("Real Madrid"));
    CHECK(clean_answer("[[Inter Milan|Internazionale]][3]") == std::optional<std::string>("Internazionale"));
    CHECK(is_country_code("ENG"));
    CHECK_FALSE(is_country_code("BAR"));
}

TEST_CASE("noise_filter") {
    CurationConfig cfg;
    std::vector<TimedAnswer> crowded;
    for (int i = 0; i < 6; ++i) crowded.push_back({"Member " + std::to_string(i), 2000, std::nullopt});
    auto q = question("crowd", "?", {});
    q.answers = crowded;
    CHECK(noise_filter(q, cfg) == std::optional<std::string>("avg_answers"));

    auto wordy = question("long", "?", {{"one two three four five six seven eight nine ten eleven", 2000, std::nullopt}});
    CHECK(noise_filter(wordy, cfg) == std::optional<std::string>("avg_len"));

    auto fine = question("ok", "?", {{"Short", 2000, 2010}, {"Other", 2011, std::nullopt}});
    CHECK_FALSE(noise_filter(fine, cfg).has_value());
}

TEST_CASE("normalized BM25 similarity") {
    std::vector<std::string> docs;
    for (const auto& q : background()) docs.push_back(q.text);
    docs.push_back("Who is the President of the United States?");
    docs.push_back("Who is the Vice President of the United States?");
    Bm25Index index(docs);
    CHECK(normalized_bm25_sim(docs[0], docs[0], index) == doctest::Approx(1.0));
    CHECK(normalized_bm25_sim("alpha beta", "gamma delta", index) == 0.0);
    CHECK(normalized_bm25_sim("", "x", index) == 0.0);

    std::mt19937_64 rng(1);
    const std::vector<std::string> vocab = {"who", "won", "cup", "league", "mayor", "the", "of", "zzz", "United"};
    for (int i = 0; i < 500; ++i) {
        std::string x, y;
        for (int k = static_cast<int>(rng() % 6); k > 0; --k) x += vocab[rng() % vocab.size()] + " ";
        for (int k = static_cast<int>(rng() % 6); k > 0; --k) y += vocab[rng() % vocab.size()] + " ";
        double s = normalized_bm25_sim(x, y, index);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("President and Vice President are similar but not duplicates") {
    auto qs = background();
    qs.push_back(question("pres", "Who is the President of the United States?", {{"Joe Biden", 2021, std::nullopt}, {"Donald Trump", 2017, 2020}}));
    qs.push_back(question("vp", "Who is the Vice President of the United States?", {{"Kamala Harris", 2021, std::nullopt}, {"Mike Pence", 2017, 2020}}));
    CurationConfig cfg;
    std::vector<std::string> texts;
    for (const auto& q : qs) texts.push_back(q.text);
    Bm25Index index(texts);
    const auto& pres = qs[qs.size() - 2].text;
    const auto& vp = qs[qs.size() - 1].text;
    CHECK(normalized_bm25_sim(pres, vp, index) > 0.8);
    CHECK(normalized_bm25_sim(vp, pres, index) < 0.8);
    auto score = pair_similarity(qs, qs.size() - 2, qs.size() - 1, cfg);
    CHECK(score.question_sim == doctest::Approx(normalized_bm25_sim(vp, pres, index)));
    CHECK(score.answer_sim < 0.5);
    CHECK_FALSE(duplicate_rule(score, cfg).has_value());
    auto out = dedup(qs, cfg);
    CHECK(out.kept.size() == qs.size());
}

TEST_CASE("duplicate rule table") {
    CurationConfig cfg;
    CHECK(duplicate_rule({0.95, 0.0}, cfg) == std::optional<std::string>("q_hi"));
    CHECK(duplicate_rule({0.0, 0.95}, cfg) == std::optional<std::string>("a_hi"));
    CHECK(duplicate_rule({0.85, 0.6}, cfg) == std::optional<std::string>("joint"));
    CHECK_FALSE(duplicate_rule({0.85, 0.2}, cfg).has_value());
    CHECK_FALSE(duplicate_rule({0.9, 0.5}, cfg).has_value());
}

TEST_CASE("dedup keeps the shortest question and reaches a fixed point") {
    auto qs = background();
    qs.push_back(question("dup-b", "Who won the Vodinerk Cup final?", {{"Alpha", 2000, 2010}, {"Beta", 2011, std::nullopt}}));
    qs.push_back(question("dup-a", "Who won the Vodinerk Cup final?", {{"Alpha", 2000, 2010}, {"Beta", 2011, std::nullopt}}));
    qs.push_back(question("dup-c", "Which team won the final of the Vodinerk Cup tournament?", {{"Alpha", 2000, 2010}, {"Beta", 2011, std::nullopt}}));
    CurationConfig cfg;
    auto out = dedup(qs, cfg);
    std::set<std::string> kept;
    for (const auto& q : out.kept) kept.insert(q.id);
    CHECK(kept.count("dup-a"));
    CHECK_FALSE(kept.count("dup-b"));
    CHECK_FALSE(kept.count("dup-c"));
    CHECK(out.log.size() == 2);
    for (const auto& d : out.log) CHECK(d.kept_id == "dup-a");
    CHECK(find_duplicate_pairs(out.kept, cfg).empty());
    auto again = dedup(out.kept, cfg);
    CHECK(again.kept == out.kept);
    CHECK(again.log.empty());
}

TEST_CASE("numeric answers and bias reduction") {
    CHECK(is_numeric_answer("42"));
    CHECK(is_numeric_answer("1,843,373,318"));
    CHECK(is_numeric_answer("$2.5"));
    CHECK(is_numeric_answer("12%"));
    CHECK_FALSE(is_numeric_answer("42nd Street"));
    CHECK_FALSE(is_numeric_answer(""));

    CurationConfig cfg;
    cfg.seed = 3;
    std::vector<TemporalQuestion> qs;
    for (int i = 0; i < 301; ++i) qs.push_back(question("f" + std::to_string(i), "?", {{"Frequent", 2000, std::nullopt}}));
    for (int i = 0; i < 300; ++i) qs.push_back(question("b" + std::to_string(i), "?", {{"Borderline", 2000, std::nullopt}}));
    qs.push_back(question("n", "?", {{"42", 2000, std::nullopt}}));
    auto res = bias_reduction(qs, cfg);
    CHECK(res.flagged == 302);
    std::size_t borderline = 0;
    for (const auto& q : res.kept) borderline += q.id[0] == 'b';
    CHECK(borderline == 300);
    std::size_t dropped = 0;
    for (const auto& [k, v] : res.reasons) dropped += v;
    CHECK(dropped == res.flagged - res.flagged_kept);
    CHECK(res.kept.size() == 300 + res.flagged_kept);
    CHECK(res.reasons.count("frequent_answer"));
}

TEST_CASE("bias keep rate is 10 percent") {
    std::vector<TemporalQuestion> qs;
    for (int i = 0; i < 10000; ++i) qs.push_back(question("q" + std::to_string(i), "?", {{std::to_string(i), 2000, std::nullopt}}));
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
        CurationConfig cfg;
        cfg.seed = seed;
        auto res = bias_reduction(qs, cfg);
        CHECK(res.flagged == 10000);
        double rate = static_cast<double>(res.kept.size()) / 10000.0;
        CHECK(rate == doctest::Approx(0.10).epsilon(0.1));
        CHECK(std::abs(rate - 0.10) <= 0.01);
    }
}

TEST_CASE("curate drops low sensitivity and conserves counts") {
    std::string csv_text = "Year,Winner,Runner-up\n";
    const std::vector<std::string> winners = {"Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot"};
    for (int i = 0; i < 6; ++i) csv_text += std::to_string(2000 + 4 * i) + "," + winners[i] + ",Same\n";
    auto t = inline_table(csv_text);
    std::vector<GeneratedPair> pairs = {{"T/table_0", "T", "Winner", "Who won the T title?"},
                                        {"T/table_0", "T", "Runner-up", "Who finished second in T?"},
                                        {"T/table_0", "T", "Missing", "Who is missing?"},
                                        {"X/table_0", "X", "Winner", "Who won X?"}};
    CurationConfig cfg;
    cfg.bias_keep_rate = 1.0;
    auto res = curate(pairs, {t}, cfg);
    REQUIRE(res.questions.size() == 1);
    CHECK(res.questions[0].text == "Who won the T title?");
    CHECK(sensitivity(res.questions[0], 2000, 2023) >= 5);

    std::size_t carried = pairs.size();
    for (const auto& row : res.attrition) {
        CAPTURE(row.stage);
        CHECK(row.input_count == carried);
        CHECK(row.input_count == row.kept + row.dropped);
        std::size_t reasons = 0;
        for (const auto& [k, v] : row.reasons) {
            if (k.rfind("flag:", 0) != 0) reasons += v;
        }
        CHECK(reasons == row.dropped);
        carried = row.kept;
    }
    CHECK(carried == res.questions.size());
    auto again = curate(pairs, {t}, cfg);
    CHECK(again.questions == res.questions);
    CHECK(attrition_csv(again.attrition) == attrition_csv(res.attrition));
    CHECK(attrition_csv(res.attrition).rfind("stage,input_count,kept,dropped,reason_histogram_json\n", 0) == 0);
}
