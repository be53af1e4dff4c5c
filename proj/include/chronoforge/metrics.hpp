#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "chronoforge/temporal_kb.hpp"

namespace chronoforge {

struct MetricConfig {
    double alpha = 0.8;
    Year year_from = kDefaultEpoch;
    Year year_to = kDefaultHorizon;
    Year horizon = kDefaultHorizon;

    void validate() const;
};

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, split on
/// whitespace. Non-ASCII bytes pass through unchanged.
std::vector<std::string> normalize_text(std::string_view s);

/// Multiset token F1 over normalized tokens. Both empty scores 1, one empty 0.
double token_f1(std::string_view pred, std::string_view gold);

bool normalized_exact_match(std::string_view pred, std::string_view gold);

/// Best token F1 against any answer valid at year j; 0 when none is valid.
double f1_at_year(std::string_view pred, const TemporalQuestion& q, Year j, Year horizon = kDefaultHorizon);

/// F^i for every i in the configured year range.
std::map<Year, double> year_scores(std::string_view pred, const TemporalQuestion& q, const MetricConfig& cfg);

double f_max(std::string_view pred, const TemporalQuestion& q, const MetricConfig& cfg);
double f_decay(std::string_view pred, const TemporalQuestion& q, Year target, const MetricConfig& cfg);

/// Same quantities computed from a precomputed year-score map.
double f_max(const std::map<Year, double>& scores);
double f_decay(const std::map<Year, double>& scores, Year target, double alpha);

struct YearScoreVector {
    std::map<Year, double> scores;
    double f_max = 0.0;
    std::map<Year, double> f_decay;
};

YearScoreVector score_prediction(std::string_view pred, const TemporalQuestion& q, const MetricConfig& cfg,
                                 const std::vector<Year>& decay_targets);

struct AggregateScores {
    std::size_t count = 0;
    std::map<Year, double> mean_curve;
    double mean_f_max = 0.0;
    std::map<Year, double> mean_f_decay;
};

/// Arithmetic means across records. Throws std::invalid_argument when empty.
AggregateScores aggregate(const std::vector<YearScoreVector>& records);

/// Score in [0,1] as a percentage with one decimal, e.g. 0.5 -> "50.0".
std::string format_percent(double score);

/// Year of the highest mean score; earliest year wins ties.
Year curve_argmax(const std::map<Year, double>& curve);

}  // namespace chronoforge
