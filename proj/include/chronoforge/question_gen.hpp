#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chronoforge/model_client.hpp"
#include "chronoforge/wiki_tables.hpp"

namespace chronoforge {

/// Text compiled in from assets/ (see cmake/EmbedAssets.cmake).
std::string_view embedded_asset(std::string_view name);

struct QGPromptConfig {
    std::string instruction;
    std::vector<std::string> fewshot_examples;  // rendered blocks, in prompt order
    std::set<Year> sample_years = {2010, 2020, 2023};
    double temperature = 1.0;
    int max_tokens = 512;
    std::size_t max_questions = 10;

    void validate() const;
};

/// Instruction and the eight demonstration blocks shipped with the toolkit.
QGPromptConfig default_qg_config();

/// The demonstration response of example `n` (1-based), as it appears after
/// "Generated questions for Example n asking for information in a specific column:".
std::string fixture_response(std::size_t n);

/// "<title> <section>, <section>." as used in "this table is about ...".
std::string table_description(std::string_view page_title, const std::vector<std::string>& sections);

struct ColumnQuestion {
    std::string column_name;
    std::string question_text;
    friend bool operator==(const ColumnQuestion&, const ColumnQuestion&) = default;
};

/// Query block alone, starting at "Query:". nullopt when no row falls in a sample year.
std::optional<std::string> build_query_block(const TemporalTable& t, const QGPromptConfig& cfg);

/// Full prompt: instruction, demonstrations, query block. nullopt = skip table.
std::optional<std::string> build_qg_prompt(const TemporalTable& t, const QGPromptConfig& cfg);

inline constexpr std::string_view kNoQuestions = "No questions can be generated.";

/// Reads "Column i: <name>" / "Question i: <text>" pairs. Pairs whose column
/// is not in the header, or reuses a column, are dropped (counted in
/// `dropped`). Throws FormatError when the text has neither pairs nor the
/// rejection sentence.
std::vector<ColumnQuestion> parse_qg_response(std::string_view text, const ExtractedTable& t,
                                              std::size_t* dropped = nullptr);

struct GeneratedPair {
    std::string table_id;
    std::string page_title;
    std::string column;
    std::string question;
};

struct QGFailure {
    std::string table_id;
    std::string reason;
};

struct QGReport {
    std::size_t tables = 0;
    std::size_t skipped_no_rows = 0;
    std::size_t rejected = 0;  // generator answered with the rejection sentence
    std::size_t tables_with_pairs = 0;
    std::size_t pairs = 0;
    std::size_t dropped_pairs = 0;
    std::size_t format_retries = 0;
};

struct QGResult {
    std::vector<GeneratedPair> pairs;
    std::vector<QGFailure> failures;
    QGReport report;
};

/// One request per table; a malformed response is re-requested once. Output
/// follows input table order.
QGResult generate_questions(ModelClient& client, const std::vector<TemporalTable>& tables, const QGPromptConfig& cfg,
                            std::size_t workers = 4);

nlohmann::ordered_json pair_to_json(const GeneratedPair& p);
GeneratedPair pair_from_json(const nlohmann::json& j);

}  // namespace chronoforge
