#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chronoforge/bm25.hpp"
#include "chronoforge/question_gen.hpp"
#include "chronoforge/temporal_kb.hpp"
#include "chronoforge/wiki_tables.hpp"

namespace chronoforge {

struct CurationConfig {
    std::size_t min_sensitivity = 5;
    double max_avg_answers_per_year = 5.0;
    double max_avg_answer_len = 10.0;
    double dup_hi = 0.9;
    double dup_q = 0.8;
    double dup_a = 0.5;
    std::size_t bias_occurrence_cap = 300;
    double bias_keep_rate = 0.10;
    std::uint64_t seed = 0;
    Bm25Params bm25;
    bool succession = true;
    Year epoch = kDefaultEpoch;
    Year horizon = kDefaultHorizon;
    std::size_t workers = 4;

    void validate() const;
};

// ---- answer extraction --------------------------------------------------------

struct ExtractionStats {
    std::size_t rows_unparseable = 0;
    std::size_t rows_empty = 0;
    bool succession_extended = false;
};

/// One TimedAnswer per dated row of `column`, dated by `spec`. Same-text
/// answers whose intervals touch or overlap are merged.
std::vector<TimedAnswer> extract_answers(const ExtractedTable& t, const TemporalColumnSpec& spec, std::size_t column,
                                         bool succession, ExtractionStats* stats = nullptr);

/// Merges same-text answers with touching or overlapping intervals and sorts
/// by (start, text).
std::vector<TimedAnswer> merge_answers(std::vector<TimedAnswer> answers);

// ---- cleaning ---------------------------------------------------------------------

/// Cleaned answer text, or nullopt for unavailable-information sentinels and
/// text that is empty after cleaning.
std::optional<std::string> clean_answer(std::string_view text);

bool is_country_code(std::string_view token);

// ---- filters ---------------------------------------------------------------------------

/// nullopt = keep; otherwise the rejection reason ("avg_answers", "avg_len",
/// "no_covered_years").
std::optional<std::string> noise_filter(const TemporalQuestion& q, const CurationConfig& cfg);

struct SimilarityScore {
    double question_sim = 0.0;
    double answer_sim = 0.0;
};

/// Sorted distinct answer texts joined by spaces.
std::string answer_operand(const TemporalQuestion& q);

/// The duplicate predicate; returns the rule that fired ("q_hi", "a_hi", "joint").
std::optional<std::string> duplicate_rule(const SimilarityScore& s, const CurationConfig& cfg);

struct DedupDecision {
    std::string removed_id;
    std::string kept_id;
    std::string partner_id;  // the neighbour whose edge linked it into the cluster
    SimilarityScore score;
    std::string rule;
    std::size_t round = 0;
};

struct DedupResult {
    std::vector<TemporalQuestion> kept;
    std::vector<DedupDecision> log;
    std::size_t rounds = 0;
};

/// All pairs satisfying the duplicate predicate, as (i, j, score, rule), i < j.
struct DuplicatePair {
    std::size_t i = 0;
    std::size_t j = 0;
    SimilarityScore score;
    std::string rule;
};
std::vector<DuplicatePair> find_duplicate_pairs(const std::vector<TemporalQuestion>& qs, const CurationConfig& cfg);

/// Pair similarity: the smaller of the two directed normalized BM25 ratios,
/// with indexes built over `qs`.
SimilarityScore pair_similarity(const std::vector<TemporalQuestion>& qs, std::size_t i, std::size_t j,
                                const CurationConfig& cfg);

DedupResult dedup(std::vector<TemporalQuestion> qs, const CurationConfig& cfg);

bool is_numeric_answer(std::string_view text);

struct BiasResult {
    std::vector<TemporalQuestion> kept;
    std::size_t flagged = 0;
    std::size_t flagged_kept = 0;
    std::map<std::string, std::size_t> reasons;
};

BiasResult bias_reduction(std::vector<TemporalQuestion> qs, const CurationConfig& cfg);

// ---- pipeline -------------------------------------------------------------------------

struct AttritionRow {
    std::string stage;
    std::size_t input_count = 0;
    std::size_t kept = 0;
    std::size_t dropped = 0;
    std::map<std::string, std::size_t> reasons;  // keys starting "flag:" are annotations, not drops
};

struct CurationResult {
    std::vector<TemporalQuestion> questions;
    std::vector<AttritionRow> attrition;
    std::vector<DedupDecision> dedup_log;
};

CurationResult curate(const std::vector<GeneratedPair>& pairs, const std::vector<TemporalTable>& tables,
                      const CurationConfig& cfg);

std::string attrition_csv(const std::vector<AttritionRow>& rows);
nlohmann::ordered_json dedup_decision_to_json(const DedupDecision& d);

}  // namespace chronoforge
