#include "chronoforge/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "chronoforge/csv.hpp"

namespace chronoforge {

const char* to_string(Category c) {
    switch (c) {
        case Category::correct: return "correct";
        case Category::misaligned: return "misaligned";
        case Category::incorrect: return "incorrect";
    }
    return "?";
}

Category category_from_string(std::string_view s) {
    if (s == "correct") return Category::correct;
    if (s == "misaligned") return Category::misaligned;
    if (s == "incorrect") return Category::incorrect;
    throw FormatError("unknown category '" + std::string(s) + "'");
}

PromptFormat prompt_format_from_name(std::string_view name) {
    if (name == "fewshot") return PromptFormat::fewshot;
    if (name == "target-year") return PromptFormat::target_year;
    if (name == "adaptive") return PromptFormat::adaptive;
    throw ConfigError("unknown prompt format '" + std::string(name) + "'");
}

const char* to_string(PromptFormat f) {
    switch (f) {
        case PromptFormat::fewshot: return "fewshot";
        case PromptFormat::target_year: return "target-year";
        case PromptFormat::adaptive: return "adaptive";
    }
    return "?";
}

ExtractMode EvalConfig::extract_mode() const {
    return format == PromptFormat::adaptive ? ExtractMode::after_marker : ExtractMode::plain;
}

void EvalConfig::validate() const {
    metrics.validate();
    if (format == PromptFormat::fewshot) {
        strategy.validate();
        shots.validate();
    }
    if (hit_threshold <= 0.0 || hit_threshold > 1.0) throw ConfigError("hit_threshold must be in (0, 1]");
    if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

Categorization categorize(std::string_view pred, const TemporalQuestion& q, Year target, double hit_threshold,
                          const MetricConfig& cfg) {
    Categorization c;
    for (Year y = cfg.year_from; y <= cfg.year_to; ++y) {
        bool hit = f1_at_year(pred, q, y, cfg.horizon) >= hit_threshold;
        if (!hit) {
            for (const auto& a : answers_at(q, y, cfg.horizon)) {
                if (normalized_exact_match(pred, a)) {
                    hit = true;
                    break;
                }
            }
        }
        if (hit) c.hit_years.insert(y);
    }
    if (c.hit_years.count(target)) c.category = Category::correct;
    else if (!c.hit_years.empty()) c.category = Category::misaligned;
    else c.category = Category::incorrect;
    return c;
}

namespace {

nlohmann::ordered_json year_map_json(const std::map<Year, double>& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [y, v] : m) j[std::to_string(y)] = v;
    return j;
}

std::map<Year, double> year_map_from(const nlohmann::json& j) {
    std::map<Year, double> m;
    for (const auto& [k, v] : j.items()) m[std::stoi(k)] = v.get<double>();
    return m;
}

}  // namespace

nlohmann::ordered_json record_to_json(const EvalRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["raw_output"] = r.raw_output;
    j["prediction"] = r.prediction;
    j["marker_missing"] = r.marker_missing;
    j["failed"] = r.failed;
    if (r.failed) {
        j["error"] = r.error;
        return j;
    }
    j["category"] = to_string(r.category);
    j["hit_years"] = std::vector<Year>(r.hit_years.begin(), r.hit_years.end());
    j["f_max"] = r.year_scores.f_max;
    j["f_decay"] = year_map_json(r.year_scores.f_decay);
    j["year_scores"] = year_map_json(r.year_scores.scores);
    return j;
}

EvalRecord record_from_json(const nlohmann::json& j) {
    try {
        EvalRecord r;
        r.id = j.at("id").get<std::string>();
        r.raw_output = j.at("raw_output").get<std::string>();
        r.prediction = j.at("prediction").get<std::string>();
        r.marker_missing = j.value("marker_missing", false);
        r.failed = j.value("failed", false);
        if (r.failed) {
            r.error = j.value("error", "");
            return r;
        }
        r.category = category_from_string(j.at("category").get<std::string>());
        for (const auto& y : j.at("hit_years")) r.hit_years.insert(y.get<Year>());
        r.year_scores.f_max = j.at("f_max").get<double>();
        r.year_scores.f_decay = year_map_from(j.at("f_decay"));
        r.year_scores.scores = year_map_from(j.at("year_scores"));
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("bad eval record: ") + ex.what());
    }
}

std::string records_to_jsonl(const std::vector<EvalRecord>& records) {
    std::string out;
    for (const auto& r : records) out += record_to_json(r).dump() + "\n";
    return out;
}

std::vector<EvalRecord> records_from_jsonl(std::string_view text) {
    std::vector<EvalRecord> out;
    std::istringstream in{std::string(text)};
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        ++n;
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError("invalid JSON", n);
        out.push_back(record_from_json(j));
    }
    return out;
}

std::string eval_prompt(const TemporalQuestion& q, const EvalConfig& cfg) {
    switch (cfg.format) {
        case PromptFormat::fewshot: return build_qa_prompt(q.text, cfg.strategy, cfg.shots);
        case PromptFormat::target_year: return target_year_prompt(q.text);
        case PromptFormat::adaptive: return adaptive_prompt(q.text);
    }
    return {};
}

std::vector<EvalRecord> run_eval(ModelClient& client, const std::vector<const TemporalQuestion*>& split,
                                 const EvalConfig& cfg) {
    if (split.empty()) throw std::invalid_argument("run_eval: empty split");
    cfg.validate();
    std::vector<const TemporalQuestion*> qs = split;
    std::sort(qs.begin(), qs.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    std::vector<EvalRecord> records(qs.size());
    const std::vector<Year> targets{cfg.target_year};
    parallel_for(qs.size(), cfg.workers, [&](std::size_t i) {
        const TemporalQuestion& q = *qs[i];
        EvalRecord& r = records[i];
        r.id = q.id;
        CompletionRequest req;
        req.prompt = eval_prompt(q, cfg);
        req.max_tokens = cfg.max_tokens;
        req.temperature = 0.0;
        req.stop = {"\n\n"};
        try {
            auto res = client.complete(req);
            if (res.texts.empty()) throw TransportError("empty completion list");
            r.raw_output = res.texts[0];
        } catch (const TransportError& e) {
            r.failed = true;
            r.error = e.what();
            return;
        }
        auto ex = extract_answer(r.raw_output, cfg.extract_mode());
        r.prediction = ex.text;
        r.marker_missing = ex.marker_missing;
        r.year_scores = score_prediction(r.prediction, q, cfg.metrics, targets);
        auto cat = categorize(r.prediction, q, cfg.target_year, cfg.hit_threshold, cfg.metrics);
        r.category = cat.category;
        r.hit_years = std::move(cat.hit_years);
    });
    return records;
}

AggregateScores aggregate_records(const std::vector<EvalRecord>& records) {
    std::vector<YearScoreVector> v;
    for (const auto& r : records) {
        if (!r.failed) v.push_back(r.year_scores);
    }
    return aggregate(v);
}

std::size_t CrossTab::total() const {
    std::size_t n = 0;
    for (const auto& [a, row] : cells) {
        for (const auto& [b, c] : row) n += c;
    }
    return n;
}

CrossTab cross_tab(const std::vector<EvalRecord>& baseline, const std::vector<EvalRecord>& run) {
    std::map<std::string, Category> base;
    for (const auto& r : baseline) {
        if (!r.failed) base[r.id] = r.category;
    }
    CrossTab t;
    for (Category a : {Category::correct, Category::misaligned, Category::incorrect}) {
        for (Category b : {Category::correct, Category::misaligned, Category::incorrect}) t.cells[a][b] = 0;
    }
    for (const auto& r : run) {
        if (r.failed) continue;
        auto it = base.find(r.id);
        if (it != base.end()) ++t.cells[it->second][r.category];
    }
    return t;
}

EarliestCorrect earliest_correct_grouping(const std::vector<EvalRecord>& records, const Dataset& ds, Year target,
                                          Year window_from) {
    EarliestCorrect out;
    for (const auto& r : records) {
        if (r.failed) continue;
        const auto* q = ds.find(r.id);
        if (!q) continue;
        const AnswerSet before = answers_at(*q, window_from - 1, ds.horizon);
        bool disjoint = true;
        for (Year y = window_from; y <= target && disjoint; ++y) {
            for (const auto& a : answers_at(*q, y, ds.horizon)) {
                if (before.count(a)) {
                    disjoint = false;
                    break;
                }
            }
        }
        if (!disjoint || answers_at(*q, target, ds.horizon).empty()) continue;
        ++out.subset_size;
        if (r.category != Category::correct) continue;
        ++out.correct;
        // start year of the target-year answer the prediction matched best
        std::optional<Year> start;
        double best = -1.0;
        for (const auto& a : q->answers) {
            if (!a.valid_at(target, ds.horizon)) continue;
            double f = normalized_exact_match(r.prediction, a.text) ? 1.0 : token_f1(r.prediction, a.text);
            if (f > best || (f == best && start && a.start_year < *start)) {
                best = f;
                start = a.start_year;
            }
        }
        ++out.histogram[*start];
    }
    return out;
}

PopularityTable popularity_buckets(const std::vector<EvalRecord>& records, const Dataset& ds, std::size_t n_buckets,
                                   Year target, const std::vector<EvalRecord>* baseline) {
    if (n_buckets == 0) throw std::invalid_argument("popularity_buckets: n_buckets must be positive");
    PopularityTable table;
    struct Item {
        double log_pop;
        double pop;
        std::string id;
        double f1;
    };
    std::vector<Item> items;
    for (const auto& r : records) {
        if (r.failed) continue;
        const auto* q = ds.find(r.id);
        if (!q || !q->popularity) {
            ++table.missing_popularity;
            continue;
        }
        auto it = r.year_scores.scores.find(target);
        double f1 = it == r.year_scores.scores.end() ? 0.0 : it->second;
        items.push_back({std::log1p(*q->popularity), *q->popularity, r.id, f1});
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        if (a.log_pop != b.log_pop) return a.log_pop < b.log_pop;
        return a.id < b.id;
    });
    std::map<std::string, double> base;
    if (baseline) {
        for (const auto& r : *baseline) {
            if (r.failed) continue;
            auto it = r.year_scores.scores.find(target);
            base[r.id] = it == r.year_scores.scores.end() ? 0.0 : it->second;
        }
    }
    const std::size_t n = std::min(n_buckets, items.size());
    std::size_t begin = 0;
    for (std::size_t b = 0; b < n; ++b) {
        std::size_t size = items.size() / n + (b < items.size() % n ? 1 : 0);
        PopularityBucket bucket;
        bucket.lo = items[begin].pop;
        bucket.hi = items[begin + size - 1].pop;
        bucket.count = size;
        double sum = 0.0;
        double bsum = 0.0;
        std::size_t bcount = 0;
        for (std::size_t i = begin; i < begin + size; ++i) {
            sum += items[i].f1;
            if (auto it = base.find(items[i].id); it != base.end()) {
                bsum += it->second;
                ++bcount;
            }
        }
        bucket.mean_f1 = sum / static_cast<double>(size);
        if (baseline && bcount > 0) {
            bucket.baseline_mean = bsum / static_cast<double>(bcount);
            bucket.delta = bucket.mean_f1 - *bucket.baseline_mean;
        }
        table.buckets.push_back(bucket);
        begin += size;
    }
    return table;
}

EvalReport build_report(std::string run_name, const std::vector<EvalRecord>& records, const Dataset& ds,
                        Year target, double hit_threshold, std::size_t n_buckets,
                        const std::vector<EvalRecord>* baseline) {
    EvalReport r;
    r.run_name = std::move(run_name);
    r.target_year = target;
    r.hit_threshold = hit_threshold;
    r.records = records.size();
    for (Category c : {Category::correct, Category::misaligned, Category::incorrect}) r.categories[c] = 0;
    for (const auto& rec : records) {
        if (rec.failed) ++r.failed;
        else ++r.categories[rec.category];
    }
    if (r.failed < records.size()) r.scores = aggregate_records(records);
    if (baseline) r.cross = cross_tab(*baseline, records);
    r.earliest = earliest_correct_grouping(records, ds, target);
    r.popularity = popularity_buckets(records, ds, n_buckets, target, baseline);
    return r;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string report_csv(const EvalReport& r) {
    std::string out = "section,key,value,baseline,delta\n";
    auto row = [&](const std::string& section, const std::string& key, const std::string& value,
                   const std::string& baseline = "", const std::string& delta = "") {
        out += csv::format_row({section, key, value, baseline, delta}) + "\n";
    };
    row("meta", "run", r.run_name);
    row("meta", "target_year", std::to_string(r.target_year));
    row("meta", "hit_threshold", num(r.hit_threshold));
    row("meta", "records", std::to_string(r.records));
    row("meta", "failed", std::to_string(r.failed));
    for (const auto& [y, v] : r.scores.mean_curve) row("curve", std::to_string(y), num(v));
    row("summary", "f_max", num(r.scores.mean_f_max));
    for (const auto& [y, v] : r.scores.mean_f_decay) row("summary", "f_decay@" + std::to_string(y), num(v));
    for (const auto& [c, n] : r.categories) row("category", to_string(c), std::to_string(n));
    if (r.cross) {
        for (const auto& [a, cols] : r.cross->cells) {
            for (const auto& [b, n] : cols) row("crosstab", std::string(to_string(a)) + ">" + to_string(b), std::to_string(n));
        }
    }
    row("earliest_correct", "subset", std::to_string(r.earliest.subset_size));
    row("earliest_correct", "correct", std::to_string(r.earliest.correct));
    for (const auto& [y, n] : r.earliest.histogram) row("earliest_correct", std::to_string(y), std::to_string(n));
    row("popularity", "missing", std::to_string(r.popularity.missing_popularity));
    for (const auto& b : r.popularity.buckets) {
        row("popularity", num(b.lo) + ".." + num(b.hi) + " (n=" + std::to_string(b.count) + ")", num(b.mean_f1),
            b.baseline_mean ? num(*b.baseline_mean) : "", b.delta ? num(*b.delta) : "");
    }
    return out;
}

nlohmann::ordered_json plot_data(const std::vector<EvalReport>& runs, const nlohmann::ordered_json& metadata) {
    nlohmann::ordered_json j;
    j["metadata"] = metadata;
    j["runs"] = nlohmann::ordered_json::array();
    for (const auto& r : runs) {
        nlohmann::ordered_json run;
        run["name"] = r.run_name;
        run["target_year"] = r.target_year;
        run["curve"] = year_map_json(r.scores.mean_curve);
        run["f_max"] = r.scores.mean_f_max;
        run["f_decay"] = year_map_json(r.scores.mean_f_decay);
        j["runs"].push_back(std::move(run));
    }
    return j;
}

}  // namespace chronoforge
