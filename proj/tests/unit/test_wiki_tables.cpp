#include <doctest.h>

#include <random>

#include "chronoforge/csv.hpp"
#include "chronoforge/wiki_tables.hpp"
#include "support.hpp"

using namespace chronoforge;

namespace {

ExtractedTable table_of(const std::string& csv_text) {
    auto t = table_from_csv(csv_text, RaggedPolicy::pad);
    REQUIRE(t.has_value());
    t->page_title = "P";
    return *t;
}

std::optional<TemporalTable> corpus_table(const std::string& slug) {
    for (auto& t : parse_tables(testsupport::source_dir() / "fixtures" / "corpus")) {
        if (t.table_id.rfind(slug + "/", 0) == 0) return TemporalTable{t, detect_temporal_columns(t)};
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("csv round trip") {
    csv::Row row = {"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
    auto parsed = csv::parse(csv::format_row(row) + "\r\n");
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0] == row);
    CHECK_THROWS_AS(csv::parse("\"open"), ParseError);
    CHECK(csv::parse("\xEF\xBB\xBF" "a,b\n")[0][0] == "a");
}

TEST_CASE("parse_interval grammar") {
    CHECK(parse_interval("1998") == RowInterval{1998, 1998});
    CHECK(parse_interval("2009–10") == RowInterval{2009, 2010});
    CHECK(parse_interval("2009-2010") == RowInterval{2009, 2010});
    CHECK(parse_interval("2019–20") == RowInterval{2019, 2020});
    CHECK(parse_interval("1999–00") == RowInterval{1999, 2000});
    CHECK(parse_interval("Incumbent", {2017}) == RowInterval{2017, std::nullopt});
    CHECK(parse_interval("2017–present") == RowInterval{2017, std::nullopt});
    CHECK(parse_interval("12 March 2010") == RowInterval{2010, 2010});
    CHECK(parse_interval("2010-03-12") == RowInterval{2010, 2010});
    CHECK(parse_interval("2004[3]") == RowInterval{2004, 2004});
    CHECK_THROWS_AS(parse_interval("Incumbent"), ParseError);
    CHECK_THROWS_AS(parse_interval("La Liga"), ParseError);
    CHECK_THROWS_AS(parse_interval("250"), ParseError);
    CHECK_THROWS_AS(parse_interval("2012–2009"), ParseError);
}

TEST_CASE("parse_interval round trips formatted intervals") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        RowInterval iv;
        iv.start_year = 1000 + static_cast<int>(rng() % 1100);
        switch (rng() % 3) {
            case 0: iv.end_year = iv.start_year; break;
            case 1: iv.end_year = std::min(2100, iv.start_year + static_cast<int>(rng() % 40)); break;
            default: break;
        }
        CHECK(parse_interval(format_interval(iv)) == iv);
    }
}

TEST_CASE("parse_tables reads the corpus layout") {
    ParseTablesReport report;
    auto tables = parse_tables(testsupport::source_dir() / "fixtures" / "corpus", {}, &report);
    CHECK(tables.size() == 20);
    CHECK(report.tables_emitted == 20);
    auto nba = corpus_table("List_of_NBA_champions");
    REQUIRE(nba);
    CHECK(nba->table.header.size() == 7);
    CHECK(nba->table.rows.size() == 4);
    CHECK(nba->table.page_title == "List of NBA champions");
}

TEST_CASE("parse_tables skips header-only tables and handles ragged rows") {
    testsupport::TempDir dir("tables");
    std::filesystem::create_directories(dir.path() / "Empty");
    write_file(dir.path() / "Empty" / "table_0.csv", "Year,Winner\n");
    std::filesystem::create_directories(dir.path() / "Ragged");
    write_file(dir.path() / "Ragged" / "table_0.csv", "Year,Winner\n2010,A,\n2011,B\n2012,C,extra\n");

    ParseTablesReport report;
    auto padded = parse_tables(dir.path(), {RaggedPolicy::pad, 1}, &report);
    REQUIRE(padded.size() == 1);
    CHECK(report.skipped_empty == 1);
    CHECK(padded[0].rows.size() == 2);
    CHECK(report.rows_repaired == 1);
    CHECK(report.rows_dropped == 1);
    CHECK(padded[0].page_title == "Ragged");
    for (const auto& row : padded[0].rows) CHECK(row.size() == 2);

    ParseTablesReport dropped;
    auto strict = parse_tables(dir.path(), {RaggedPolicy::drop, 1}, &dropped);
    REQUIRE(strict.size() == 1);
    CHECK(strict[0].rows.size() == 1);
    CHECK(dropped.rows_dropped == 2);
}

TEST_CASE("detect_temporal_columns") {
    auto films = table_of("Established,Title,Record-setting gross\n1998,Titanic,1\n2010,Avatar,2\n2019,Endgame,3\n2022,Avatar,4\n");
    auto specs = detect_temporal_columns(films);
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].column_index == 0);
    CHECK(specs[0].kind == TemporalKind::point_year);

    auto service = table_of("Name,Began active service,Ended active service\nA,2001,2010\nB,2017,Incumbent\n");
    specs = detect_temporal_columns(service);
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].kind == TemporalKind::start_end_pair);
    CHECK(specs[0].column_index == 1);
    CHECK(specs[0].paired_end_index == std::optional<std::size_t>(2));

    auto seasons = table_of("Season,League\n2009–10,La Liga\n2010–11,La Liga\n");
    specs = detect_temporal_columns(seasons);
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].kind == TemporalKind::range);

    auto prose = table_of("Name,Notes\nAlpha,tall\nBeta,short\n");
    CHECK(detect_temporal_columns(prose).empty());

    for (const auto& t : parse_tables(testsupport::source_dir() / "fixtures" / "corpus")) {
        for (const auto& s : detect_temporal_columns(t)) {
            CHECK(s.column_index < t.header.size());
            if (s.paired_end_index) CHECK(*s.paired_end_index < t.header.size());
        }
    }
}

TEST_CASE("succession extension of point-year timelines") {
    auto nba = corpus_table("List_of_NBA_champions");
    REQUIRE(nba);
    auto spec = primary_temporal_spec(nba->specs);
    REQUIRE(spec);
    auto iv = row_intervals(nba->table, *spec, true);
    CHECK(iv.succession_extended);
    CHECK(iv.rows[0] == RowInterval{2000, 2009});
    CHECK(iv.rows[3] == RowInterval{2023, std::nullopt});
    auto raw = row_intervals(nba->table, *spec, false);
    CHECK(raw.rows[0] == RowInterval{2000, 2000});
}

TEST_CASE("filter_contemporary") {
    auto make = [](const std::string& csv_text) {
        auto t = table_of(csv_text);
        return TemporalTable{t, detect_temporal_columns(t)};
    };
    std::string covering = "Season,Winner\n";
    for (int y = 2010; y <= 2023; ++y) covering += std::to_string(y) + "–" + std::to_string((y + 1) % 100 / 10) + std::to_string((y + 1) % 10) + ",W" + std::to_string(y) + "\n";
    std::string partial = "Year,Winner\n";
    for (int y = 2010; y <= 2019; ++y) partial += std::to_string(y) + ",W\n";
    auto open = make("Name,Start,End\nA,2005,Incumbent\n");

    std::vector<TemporalTable> in = {make(covering), make(partial), open};
    auto once = filter_contemporary(in);
    REQUIRE(once.size() == 2);
    CHECK(once[0].table.rows.size() == 14);
    CHECK(once[1].table.rows.size() == 1);
    auto twice = filter_contemporary(once);
    REQUIRE(twice.size() == once.size());
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i].table == once[i].table);
}
