#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chronoforge/common.hpp"

namespace chronoforge {

/// One table pulled out of a Wikipedia page, already flattened to CSV cells.
struct ExtractedTable {
    std::string table_id;  // "<page_slug>/<table_n>"
    std::string page_title;
    std::vector<std::string> section_path;
    std::optional<std::string> caption;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column_index(std::string_view name) const;
    friend bool operator==(const ExtractedTable&, const ExtractedTable&) = default;
};

enum class TemporalKind { point_year, range, start_end_pair };

const char* to_string(TemporalKind k);
TemporalKind temporal_kind_from_string(std::string_view s);

struct TemporalColumnSpec {
    std::size_t column_index = 0;
    TemporalKind kind = TemporalKind::point_year;
    std::optional<std::size_t> paired_end_index;

    friend bool operator==(const TemporalColumnSpec&, const TemporalColumnSpec&) = default;
};

struct RowInterval {
    Year start_year = 0;
    std::optional<Year> end_year;  // absent = open

    bool covers(Year t) const { return start_year <= t && (!end_year || t <= *end_year); }
    friend bool operator==(const RowInterval&, const RowInterval&) = default;
};

struct TemporalTable {
    ExtractedTable table;
    std::vector<TemporalColumnSpec> specs;
};

// ---- interval grammar -------------------------------------------------------

struct IntervalContext {
    std::optional<Year> paired_start;  // start year of the row, for "Incumbent"/"present" end cells
    Year min_year = 1000;
    Year max_year = 2100;
};

/// Parses a single temporal cell. Accepted forms:
///   "1998", "1998.0", "2009–10", "2009-2010", "1999–00", "2017–present",
///   "Incumbent"/"present" (needs ctx.paired_start), ISO dates "2010-03-12",
///   "12 March 2010", "March 12, 2010", "March 2010".
/// Footnote markers like "[1]" are ignored. Throws ParseError otherwise.
RowInterval parse_interval(std::string_view cell, const IntervalContext& ctx = {});

/// Canonical text form accepted by parse_interval.
std::string format_interval(const RowInterval& interval);

// ---- ingestion ---------------------------------------------------------------

enum class RaggedPolicy { pad, drop };

struct ParseTablesConfig {
    RaggedPolicy ragged = RaggedPolicy::pad;
    std::size_t workers = 1;
};

struct ParseTablesReport {
    std::size_t files_seen = 0;
    std::size_t tables_emitted = 0;
    std::size_t skipped_empty = 0;
    std::size_t skipped_unreadable = 0;
    std::size_t rows_repaired = 0;
    std::size_t rows_dropped = 0;
    std::vector<std::string> warnings;
};

/// Reads `<root>/<page_slug>/<table_n>.csv` with `<root>/<page_slug>/meta.json`
/// (`{"page_title": str, "sections": {table_n: [str]}, "captions": {table_n: str}}`).
/// Without meta.json the page title falls back to the slug with underscores as spaces.
std::vector<ExtractedTable> parse_tables(const std::filesystem::path& root, const ParseTablesConfig& cfg = {},
                                         ParseTablesReport* report = nullptr);

/// Builds a table from CSV text; ragged rows are repaired or dropped per policy.
std::optional<ExtractedTable> table_from_csv(std::string_view csv_text, RaggedPolicy ragged,
                                             std::size_t* repaired = nullptr, std::size_t* dropped = nullptr);

// ---- temporal column detection -------------------------------------------------

struct DetectConfig {
    std::vector<std::string> header_keywords = {"year",  "years", "season", "seasons", "date",   "dates",
                                                 "established", "final", "term", "tenure", "session"};
    double cell_parse_threshold = 0.8;
    IntervalContext grammar;
};

std::vector<TemporalColumnSpec> detect_temporal_columns(const ExtractedTable& t, const DetectConfig& cfg = {});

/// The spec used to date rows when extracting answers from `answer_column`:
/// start/end pairs first, then ranges, then point years, leftmost within a kind.
std::optional<TemporalColumnSpec> primary_temporal_spec(const std::vector<TemporalColumnSpec>& specs,
                                                        std::optional<std::size_t> answer_column = std::nullopt);

struct RowIntervals {
    std::vector<std::optional<RowInterval>> rows;  // nullopt = unparseable row
    bool succession_extended = false;
};

/// Dates every row. With `succession` set, a point-year column whose parsed
/// years strictly increase is read as a timeline: each row holds until the
/// next row's year minus one and the last row stays open.
RowIntervals row_intervals(const ExtractedTable& t, const TemporalColumnSpec& spec, bool succession,
                           const IntervalContext& grammar = {});

/// True iff the union of row intervals covers every year in [from, to].
bool covers_range(const ExtractedTable& t, const TemporalColumnSpec& spec, Year from, Year to);

std::vector<TemporalTable> filter_contemporary(std::vector<TemporalTable> tables, Year from = 2010, Year to = 2023);

// ---- serialization ---------------------------------------------------------------

nlohmann::ordered_json table_to_json(const TemporalTable& t);
TemporalTable table_from_json(const nlohmann::json& j);

}  // namespace chronoforge
