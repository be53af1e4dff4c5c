#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronoforge/common.hpp"

namespace chronoforge {

/// An answer together with the inclusive span of years in which it holds.
/// A missing end year means the answer is still valid at the dataset horizon.
struct TimedAnswer {
    std::string text;
    Year start_year = 0;
    std::optional<Year> end_year;

    Year end_or(Year horizon) const { return end_year.value_or(horizon); }
    bool valid_at(Year t, Year horizon) const { return start_year <= t && t <= end_or(horizon); }

    friend bool operator==(const TimedAnswer&, const TimedAnswer&) = default;
};

struct TemporalQuestion {
    std::string id;
    std::string text;
    std::vector<TimedAnswer> answers;
    std::string page_title;
    std::string section;
    std::string column;
    std::optional<double> popularity;  // average monthly pageviews

    friend bool operator==(const TemporalQuestion&, const TemporalQuestion&) = default;
};

enum class Split { train, dev, test };

const char* to_string(Split s);
Split split_from_string(std::string_view s);

using AnswerSet = std::set<std::string>;

struct Dataset {
    std::vector<TemporalQuestion> questions;
    std::map<std::string, Split> split_assignment;
    Year horizon = kDefaultHorizon;
    Year epoch = kDefaultEpoch;

    const TemporalQuestion* find(std::string_view id) const;
    std::vector<const TemporalQuestion*> split(Split s) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Answers valid at year t. Open-ended answers close at `horizon`.
AnswerSet answers_at(const TemporalQuestion& q, Year t, Year horizon = kDefaultHorizon);

/// Number of distinct yearly answer sets over [from, to] (the empty set counts
/// once if it occurs). Throws std::invalid_argument when from > to.
std::size_t sensitivity(const TemporalQuestion& q, Year from, Year to, Year horizon = kDefaultHorizon);

/// True when every year in [from, to] has at least one valid answer.
bool answerable_throughout(const TemporalQuestion& q, Year from, Year to, Year horizon = kDefaultHorizon);

/// Smallest valid answer at t, if any. Used wherever a single deterministic
/// answer has to be picked from a co-valid set.
std::optional<std::string> canonical_answer_at(const TemporalQuestion& q, Year t,
                                               Year horizon = kDefaultHorizon);

// ---- JSONL persistence ----------------------------------------------------

nlohmann::ordered_json question_to_json(const TemporalQuestion& q, std::optional<Split> split);
TemporalQuestion question_from_json(const nlohmann::json& j);

/// Checks per-record and cross-record invariants; throws ValidationError.
void validate_question(const TemporalQuestion& q);
void validate_dataset(const Dataset& ds);

Dataset load_dataset(const std::filesystem::path& path, Year horizon = kDefaultHorizon,
                     Year epoch = kDefaultEpoch);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string dataset_to_jsonl(const Dataset& ds);

// ---- splitting ---------------------------------------------------------------

struct SplitConfig {
    std::uint64_t seed = 0;
    std::size_t dev_size = 1000;
    std::size_t test_size = 9000;
};

/// Page-disjoint train/dev/test split. Dev and test only receive pages whose
/// questions are all answerable in every year from epoch to horizon.
Dataset split_dataset(std::vector<TemporalQuestion> questions, const SplitConfig& cfg,
                      Year horizon = kDefaultHorizon, Year epoch = kDefaultEpoch);

}  // namespace chronoforge
