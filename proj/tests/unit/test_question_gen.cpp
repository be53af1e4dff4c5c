#include <doctest.h>

#include <set>

#include "chronoforge/question_gen.hpp"
#include "chronoforge/stub_oracle.hpp"
#include "support.hpp"

using namespace chronoforge;

namespace {

TemporalTable uefa_table() {
    auto tables = parse_tables(testsupport::fixture("qg"));
    REQUIRE(tables.size() == 1);
    return {tables[0], detect_temporal_columns(tables[0])};
}

TemporalTable inline_table(const std::string& title, const std::string& csv_text) {
    auto t = table_from_csv(csv_text, RaggedPolicy::pad);
    REQUIRE(t);
    t->table_id = title + "/table_0";
    t->page_title = title;
    t->section_path = {"Winners"};
    return {*t, detect_temporal_columns(*t)};
}

// Answers a fixed script of responses in order, then repeats the last.
class ScriptedClient : public ModelClient {
public:
    explicit ScriptedClient(std::map<std::string, std::vector<std::string>> by_title) : script_(std::move(by_title)) {}
    CompletionResult complete(const CompletionRequest& req) override {
        std::lock_guard lock(mu_);
        for (auto& [title, replies] : script_) {
            if (req.prompt.find("this table is about " + title + " ") == std::string::npos) continue;
            if (replies.empty()) throw TransportError("down");
            std::string text = replies.front();
            if (replies.size() > 1) replies.erase(replies.begin());
            return {{text}, {std::nullopt}};
        }
        throw TransportError("no script");
    }

private:
    std::mutex mu_;
    std::map<std::string, std::vector<std::string>> script_;
};

}  // namespace

TEST_CASE("UEFA query block matches the golden prompt") {
    auto t = uefa_table();
    auto cfg = default_qg_config();
    auto block = build_query_block(t, cfg);
    REQUIRE(block);
    CHECK(block->find("2008,SCO") == std::string::npos);
    CHECK(block->find("2010,POR,José Mourinho,ITA,Inter Milan\n") != std::string::npos);
    auto prompt = build_qg_prompt(t, cfg);
    REQUIRE(prompt);
    CHECK(*prompt == read_file(testsupport::fixture("qg/uefa_prompt.txt")));
    CHECK(*build_qg_prompt(t, cfg) == *prompt);
}

TEST_CASE("query rows follow sample-year intersection") {
    auto cfg = default_qg_config();
    auto t = inline_table("Cup", "Year,Winner\n2015,A\n2020,B\n2023,C\n");
    cfg.sample_years = {2010, 2020, 2023};
    auto spec = primary_temporal_spec(t.specs);
    REQUIRE(spec);
    auto block = build_query_block(t, cfg);
    REQUIRE(block);
    // 2015 holds until 2019 under succession, so it misses every sample year
    CHECK(block->find("2015,A") == std::string::npos);
    CHECK(block->find("2020,B") != std::string::npos);
    CHECK(block->find("2023,C") != std::string::npos);

    auto old = inline_table("Old", "Name,Start,End\nA,1950,1960\nB,1961,1970\n");
    CHECK_FALSE(build_query_block(old, cfg).has_value());
}

TEST_CASE("table description joins title and sections") {
    CHECK(table_description("List of highest-grossing films", {"Timeline of highest-grossing films"}) ==
          "List of highest-grossing films Timeline of highest-grossing films.");
    CHECK(table_description("T", {"A", "B"}) == "T A, B.");
}

TEST_CASE("parse_qg_response") {
    auto t = uefa_table().table;
    auto pairs = parse_qg_response(read_file(testsupport::fixture("qg/uefa_response.txt")), t);
    REQUIRE(pairs.size() == 5);
    CHECK(pairs[0] == ColumnQuestion{"Final", "In which UEFA Champions League final did the winning manager lead his team to victory?"});

    CHECK(parse_qg_response("No questions can be generated.", t).empty());

    std::size_t dropped = 0;
    auto some = parse_qg_response("Column 0: Score\nQuestion 0: What was the score?\n\nColumn 1: winning   MANAGER\n"
                                  "Question 1: Who won?\n\nColumn 2: Winning manager\nQuestion 2: Who again?",
                                  t, &dropped);
    REQUIRE(some.size() == 1);
    CHECK(some[0].column_name == "Winning manager");
    CHECK(dropped == 2);

    CHECK_THROWS_AS(parse_qg_response("I am not sure what you mean.", t), FormatError);
}

TEST_CASE("every demonstration response parses with unique columns") {
    auto tables = parse_tables(testsupport::source_dir() / "fixtures" / "corpus");
    auto cfg = default_qg_config();
    for (std::size_t n = 1; n <= 8; ++n) {
        auto response = fixture_response(n);
        for (const auto& t : tables) {
            if (cfg.fewshot_examples[n - 1].find("this table is about " + table_description(t.page_title, t.section_path)) ==
                std::string::npos)
                continue;
            auto pairs = parse_qg_response(response, t);
            std::set<std::string> cols;
            for (const auto& p : pairs) CHECK(cols.insert(p.column_name).second);
            if (n == 8) CHECK(pairs.empty());
            else CHECK_FALSE(pairs.empty());
        }
    }
}

TEST_CASE("generate_questions over the demonstration tables") {
    std::vector<TemporalTable> tables;
    for (const auto& t : parse_tables(testsupport::source_dir() / "fixtures" / "corpus")) {
        if (t.page_title.find("Vodinerk") != std::string::npos) continue;
        tables.push_back({t, detect_temporal_columns(t)});
    }
    StubOracle stub(nullptr, {});
    auto cfg = default_qg_config();
    auto a = generate_questions(stub, tables, cfg, 4);
    auto b = generate_questions(stub, tables, cfg, 1);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) CHECK(pair_to_json(a.pairs[i]) == pair_to_json(b.pairs[i]));

    std::set<std::string> demo_pages;
    for (const auto& p : a.pairs) demo_pages.insert(p.page_title);
    CHECK(demo_pages.count("List of NBA champions"));
    CHECK(demo_pages.count("Chris Pratt"));
    CHECK_FALSE(demo_pages.count("List of Denmark women's international footballers"));
}

TEST_CASE("generate_questions handles rejection, format retry and transport failure") {
    std::vector<TemporalTable> tables = {inline_table("Alpha", "Year,Winner\n2010,A\n2020,B\n"),
                                         inline_table("Beta", "Year,Winner\n2010,A\n2020,B\n"),
                                         inline_table("Gamma", "Year,Winner\n2010,A\n2020,B\n"),
                                         inline_table("Delta", "Year,Winner\n2010,A\n2020,B\n")};
    ScriptedClient client({{"Alpha", {"Column 0: Winner\nQuestion 0: Who won?"}},
                           {"Beta", {"No questions can be generated."}},
                           {"Gamma", {"garbage", "Column 0: Winner\nQuestion 0: Who won the Gamma?"}},
                           {"Delta", {}}});
    auto res = generate_questions(client, tables, default_qg_config(), 2);
    REQUIRE(res.pairs.size() == 2);
    CHECK(res.pairs[0].page_title == "Alpha");
    CHECK(res.pairs[1].question == "Who won the Gamma?");
    CHECK(res.report.rejected == 1);
    CHECK(res.report.format_retries == 1);
    REQUIRE(res.failures.size() == 1);
    CHECK(res.failures[0].table_id == "Delta/table_0");

    auto j = pair_to_json(res.pairs[0]);
    CHECK(j.dump() == R"({"page_title":"Alpha","table_id":"Alpha/table_0","column":"Winner","question":"Who won?"})");
    CHECK(pair_to_json(pair_from_json(nlohmann::json::parse(j.dump()))) == j);
}
