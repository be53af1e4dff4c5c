#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronoforge/metrics.hpp"
#include "chronoforge/model_client.hpp"
#include "chronoforge/prompting.hpp"
#include "chronoforge/temporal_kb.hpp"

namespace chronoforge {

enum class Category { correct, misaligned, incorrect };
const char* to_string(Category c);
Category category_from_string(std::string_view s);

/// How the model is prompted: few-shot (untuned), or one of the two
/// finetuning formats.
enum class PromptFormat { fewshot, target_year, adaptive };
PromptFormat prompt_format_from_name(std::string_view name);
const char* to_string(PromptFormat f);

struct EvalConfig {
    PromptFormat format = PromptFormat::fewshot;
    PromptStrategy strategy;
    FewShotSet shots = fixture_shots(ExampleKind::time_insensitive);
    Year target_year = 2022;
    double hit_threshold = 0.8;
    MetricConfig metrics;
    int max_tokens = 32;
    std::size_t workers = 8;

    ExtractMode extract_mode() const;
    void validate() const;
};

struct Categorization {
    Category category = Category::incorrect;
    std::set<Year> hit_years;
};

/// Year i is a hit when F^i >= hit_threshold or the prediction exactly
/// matches (normalized) an answer valid at i.
Categorization categorize(std::string_view pred, const TemporalQuestion& q, Year target, double hit_threshold,
                          const MetricConfig& cfg);

struct EvalRecord {
    std::string id;
    std::string raw_output;
    std::string prediction;
    bool marker_missing = false;
    YearScoreVector year_scores;
    Category category = Category::incorrect;
    std::set<Year> hit_years;
    bool failed = false;
    std::string error;
};

nlohmann::ordered_json record_to_json(const EvalRecord& r);
EvalRecord record_from_json(const nlohmann::json& j);
std::string records_to_jsonl(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> records_from_jsonl(std::string_view text);

std::string eval_prompt(const TemporalQuestion& q, const EvalConfig& cfg);

/// Greedy completion per question, scored against every year. Records come
/// back sorted by id. Throws std::invalid_argument on an empty split.
std::vector<EvalRecord> run_eval(ModelClient& client, const std::vector<const TemporalQuestion*>& split,
                                 const EvalConfig& cfg);

// ---- analyses -------------------------------------------------------------------------

/// Scored (non-failed) records only.
AggregateScores aggregate_records(const std::vector<EvalRecord>& records);

/// cells[baseline category][run category], over ids present in both runs.
struct CrossTab {
    std::map<Category, std::map<Category, std::size_t>> cells;
    std::size_t total() const;
};
CrossTab cross_tab(const std::vector<EvalRecord>& baseline, const std::vector<EvalRecord>& run);

struct EarliestCorrect {
    std::size_t subset_size = 0;
    std::size_t correct = 0;
    std::map<Year, std::size_t> histogram;
};

/// Restricted to questions whose answers over [window_from, target] share
/// nothing with the answers at window_from - 1; correct records are grouped
/// by the start year of the target-year answer they matched.
EarliestCorrect earliest_correct_grouping(const std::vector<EvalRecord>& records, const Dataset& ds, Year target,
                                          Year window_from = 2020);

struct PopularityBucket {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double mean_f1 = 0.0;
    std::optional<double> baseline_mean;
    std::optional<double> delta;
};

struct PopularityTable {
    std::vector<PopularityBucket> buckets;
    std::size_t missing_popularity = 0;
};

/// Equal-count buckets by log pageviews; mean F^target per bucket, and the
/// baseline's mean over the same questions when given.
PopularityTable popularity_buckets(const std::vector<EvalRecord>& records, const Dataset& ds, std::size_t n_buckets,
                                   Year target, const std::vector<EvalRecord>* baseline = nullptr);

struct EvalReport {
    std::string run_name;
    Year target_year = 0;
    double hit_threshold = 0.0;
    std::size_t records = 0;
    std::size_t failed = 0;
    AggregateScores scores;
    std::map<Category, std::size_t> categories;
    std::optional<CrossTab> cross;
    EarliestCorrect earliest;
    PopularityTable popularity;
};

EvalReport build_report(std::string run_name, const std::vector<EvalRecord>& records, const Dataset& ds,
                        Year target, double hit_threshold, std::size_t n_buckets,
                        const std::vector<EvalRecord>* baseline = nullptr);

/// section,key,value,baseline,delta
std::string report_csv(const EvalReport& r);

/// Per-year curves of several runs plus decoding metadata, for plotting.
nlohmann::ordered_json plot_data(const std::vector<EvalReport>& runs, const nlohmann::ordered_json& metadata);

}  // namespace chronoforge
