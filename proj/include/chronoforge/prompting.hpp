#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chronoforge/model_client.hpp"
#include "chronoforge/temporal_kb.hpp"

namespace chronoforge {

inline constexpr std::string_view kQuestionPrefix = "Answer the following question: ";
inline constexpr std::string_view kPlainLeadIn = "The answer is:";
inline constexpr std::string_view kAnswerMarker = "the answer is:";

enum class ExampleKind { time_insensitive, time_sensitive };

struct PromptStrategy {
    ExampleKind example_kind = ExampleKind::time_insensitive;
    bool mention_time = false;
    std::optional<Year> target_year;

    void validate() const;
};

/// "insensitive", "insensitive-time", "sensitive", "sensitive-time".
PromptStrategy strategy_from_name(std::string_view name, std::optional<Year> target_year);
std::string strategy_name(const PromptStrategy& s);

struct QAPair {
    std::string question;
    std::string answer;
    friend bool operator==(const QAPair&, const QAPair&) = default;
};

struct FewShotSet {
    std::vector<QAPair> examples;
    std::string source = "fixed_fixture";  // or "selected"

    void validate() const;
};

/// The five fixed demonstrations of each kind.
FewShotSet fixture_shots(ExampleKind kind);

/// "The answer is:" or "As of year <y>, the answer is:".
std::string lead_in(std::optional<Year> year);

std::string build_qa_prompt(std::string_view question, const PromptStrategy& strat, const FewShotSet& shots);

// ---- finetuning formats -------------------------------------------------------

std::string target_year_prompt(std::string_view question);
std::string adaptive_prompt(std::string_view question);
std::string adaptive_completion(Year year, std::string_view answer);

// ---- answer extraction -----------------------------------------------------------

enum class ExtractMode { plain, after_marker };

struct ExtractedAnswer {
    std::string text;
    bool marker_missing = false;
};

/// plain: first non-empty line, trimmed. after_marker: text after the last
/// "the answer is:" (any case) up to the end of that line; falls back to
/// plain and sets marker_missing when there is no marker.
ExtractedAnswer extract_answer(std::string_view raw, ExtractMode mode);

/// Parses "Based on my latest knowledge for this question from year <y>, the
/// answer is: <a>" back into (y, a).
std::optional<std::pair<Year, std::string>> parse_adaptive_completion(std::string_view text);

// ---- few-shot selection ------------------------------------------------------------

struct FewShotConfig {
    std::size_t trials = 20;
    std::size_t pool_size = 200;
    std::uint64_t seed = 0;
    std::optional<std::size_t> dev_sample;
    std::size_t workers = 4;
    Year horizon = kDefaultHorizon;
};

struct FewShotSelection {
    FewShotSet shots;
    double dev_score = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::vector<double> trial_scores;
    std::vector<std::string> warnings;
};

/// Draws `trials` random 5-shot sets from the most popular training questions
/// and keeps the one with the best mean target-year F1 on dev.
FewShotSelection select_fewshot(ModelClient& client, const std::vector<const TemporalQuestion*>& train,
                                const std::vector<const TemporalQuestion*>& dev, const PromptStrategy& strat,
                                const FewShotConfig& cfg);

nlohmann::ordered_json selection_to_json(const FewShotSelection& s, const PromptStrategy& strat);
FewShotSet shots_from_json(const nlohmann::json& j);

}  // namespace chronoforge
