#include "chronoforge/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

namespace chronoforge {

void MetricConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
    if (year_from > year_to) throw std::invalid_argument("metric year range is reversed");
}

std::vector<std::string> normalize_text(std::string_view s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (char c : s) {
        unsigned char u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::ispunct(u)) continue;
        cleaned += (u < 0x80) ? static_cast<char>(std::tolower(u)) : c;
    }
    std::vector<std::string> tokens;
    for (auto& tok : split_whitespace(cleaned)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

double token_f1(std::string_view pred, std::string_view gold) {
    const auto p = normalize_text(pred);
    const auto g = normalize_text(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::unordered_map<std::string, int> counts;
    for (const auto& t : g) ++counts[t];
    std::size_t overlap = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    // 2PR/(P+R) reduced to one correctly rounded division
    return static_cast<double>(2 * overlap) / static_cast<double>(p.size() + g.size());
}

bool normalized_exact_match(std::string_view pred, std::string_view gold) {
    return normalize_text(pred) == normalize_text(gold);
}

double f1_at_year(std::string_view pred, const TemporalQuestion& q, Year j, Year horizon) {
    double best = 0.0;
    for (const auto& a : q.answers) {
        if (a.valid_at(j, horizon)) best = std::max(best, token_f1(pred, a.text));
    }
    return best;
}

std::map<Year, double> year_scores(std::string_view pred, const TemporalQuestion& q, const MetricConfig& cfg) {
    // token_f1 depends only on the answer text, so score each distinct text once
    std::unordered_map<std::string, double> by_text;
    for (const auto& a : q.answers) {
        if (!by_text.count(a.text)) by_text.emplace(a.text, token_f1(pred, a.text));
    }
    std::map<Year, double> out;
    for (Year y = cfg.year_from; y <= cfg.year_to; ++y) {
        double best = 0.0;
        for (const auto& a : q.answers) {
            if (a.valid_at(y, cfg.horizon)) best = std::max(best, by_text[a.text]);
        }
        out[y] = best;
    }
    return out;
}

double f_max(const std::map<Year, double>& scores) {
    double best = 0.0;
    for (const auto& [y, s] : scores) best = std::max(best, s);
    return best;
}

double f_decay(const std::map<Year, double>& scores, Year target, double alpha) {
    double best = 0.0;
    for (const auto& [y, s] : scores) {
        if (s == 0.0) continue;
        best = std::max(best, s * std::pow(alpha, std::abs(y - target)));
    }
    return best;
}

double f_max(std::string_view pred, const TemporalQuestion& q, const MetricConfig& cfg) {
    return f_max(year_scores(pred, q, cfg));
}

double f_decay(std::string_view pred, const TemporalQuestion& q, Year target, const MetricConfig& cfg) {
    cfg.validate();
    return f_decay(year_scores(pred, q, cfg), target, cfg.alpha);
}

YearScoreVector score_prediction(std::string_view pred, const TemporalQuestion& q, const MetricConfig& cfg,
                                 const std::vector<Year>& decay_targets) {
    YearScoreVector v;
    v.scores = year_scores(pred, q, cfg);
    v.f_max = f_max(v.scores);
    for (Year t : decay_targets) v.f_decay[t] = f_decay(v.scores, t, cfg.alpha);
    return v;
}

AggregateScores aggregate(const std::vector<YearScoreVector>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    AggregateScores agg;
    agg.count = records.size();
    for (const auto& r : records) {
        for (const auto& [y, s] : r.scores) agg.mean_curve[y] += s;
        agg.mean_f_max += r.f_max;
        for (const auto& [t, s] : r.f_decay) agg.mean_f_decay[t] += s;
    }
    const double n = static_cast<double>(records.size());
    for (auto& [y, s] : agg.mean_curve) s /= n;
    agg.mean_f_max /= n;
    for (auto& [t, s] : agg.mean_f_decay) s /= n;
    return agg;
}

std::string format_percent(double score) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", score * 100.0);
    return buf;
}

Year curve_argmax(const std::map<Year, double>& curve) {
    if (curve.empty()) throw std::invalid_argument("curve_argmax: empty curve");
    auto best = curve.begin();
    for (auto it = curve.begin(); it != curve.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

}  // namespace chronoforge
