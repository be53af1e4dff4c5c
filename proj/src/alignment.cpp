#include "chronoforge/alignment.hpp"

#include <algorithm>
#include <mutex>
#include <random>
#include <sstream>

#include "chronoforge/metrics.hpp"
#include "chronoforge/prompting.hpp"
#include "chronoforge/toml.hpp"

namespace chronoforge {

SelectionStrategy selection_strategy_from_name(std::string_view name) {
    if (name == "correctness") return SelectionStrategy::correctness;
    if (name == "popularity") return SelectionStrategy::popularity;
    if (name == "confidence") return SelectionStrategy::confidence;
    if (name == "random") return SelectionStrategy::random;
    throw ConfigError("unknown selection strategy '" + std::string(name) + "'");
}

const char* to_string(SelectionStrategy s) {
    switch (s) {
        case SelectionStrategy::correctness: return "correctness";
        case SelectionStrategy::popularity: return "popularity";
        case SelectionStrategy::confidence: return "confidence";
        case SelectionStrategy::random: return "random";
    }
    return "?";
}

void AlignmentConfig::validate() const {
    if (!(adaptive_threshold > 0.0 && adaptive_threshold <= 1.0)) throw ConfigError("adaptive_threshold must be in (0, 1]");
    if (n_samples < 1) throw ConfigError("n_samples must be positive");
    if (select_k == 0) throw ConfigError("select_k must be positive");
    if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
    if (epoch > horizon) throw ConfigError("epoch is after horizon");
    if (cutoff_year < epoch) throw ConfigError("cutoff_year precedes epoch");
    if (sample_temperature < 0.0) throw ConfigError("sample_temperature must be non-negative");
}

const char* to_string(LossMask m) { return m == LossMask::answer_only ? "answer_only" : "full_output"; }

LossMask loss_mask_from_string(std::string_view s) {
    if (s == "answer_only") return LossMask::answer_only;
    if (s == "full_output") return LossMask::full_output;
    throw FormatError("unknown loss_mask '" + std::string(s) + "'");
}

nlohmann::ordered_json example_to_json(const TrainingExample& e) {
    nlohmann::ordered_json j;
    j["prompt"] = e.prompt;
    j["completion"] = e.completion;
    j["loss_mask"] = to_string(e.loss_mask);
    j["assigned_year"] = e.assigned_year ? nlohmann::ordered_json(*e.assigned_year) : nlohmann::ordered_json(nullptr);
    j["id"] = e.id;
    return j;
}

TrainingExample example_from_json(const nlohmann::json& j) {
    try {
        TrainingExample e;
        e.prompt = j.at("prompt").get<std::string>();
        e.completion = j.at("completion").get<std::string>();
        e.loss_mask = loss_mask_from_string(j.at("loss_mask").get<std::string>());
        if (!j.at("assigned_year").is_null()) e.assigned_year = j.at("assigned_year").get<Year>();
        e.id = j.at("id").get<std::string>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("bad training example: ") + ex.what());
    }
}

std::string examples_to_jsonl(const std::vector<TrainingExample>& examples) {
    std::string out;
    for (const auto& e : examples) out += example_to_json(e).dump() + "\n";
    return out;
}

std::vector<TrainingExample> examples_from_jsonl(std::string_view text) {
    std::vector<TrainingExample> out;
    std::istringstream in{std::string(text)};
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        ++n;
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError("invalid JSON", n);
        out.push_back(example_from_json(j));
    }
    return out;
}

void HyperParams::validate() const {
    if (epochs <= 0 || learning_rate <= 0 || warmup_ratio <= 0 || max_seq_len <= 0 || batch_size <= 0) {
        throw ValidationError("hyperparameters must be positive");
    }
    if (weight_decay < 0) throw ValidationError("weight_decay must be non-negative");
}

std::string emit_hparams(const HyperParams& hp) {
    hp.validate();
    nlohmann::ordered_json j;
    j["precision"] = hp.precision;
    j["epochs"] = hp.epochs;
    j["learning_rate"] = hp.learning_rate;
    j["warmup_ratio"] = hp.warmup_ratio;
    j["schedule"] = hp.schedule;
    j["weight_decay"] = hp.weight_decay;
    j["max_seq_len"] = hp.max_seq_len;
    j["batch_size"] = hp.batch_size;
    return "# finetuning hyperparameters\n"
           "# the source table lists \"Linear\" under weight decay; read here as a linear-decay\n"
           "# learning-rate schedule with weight_decay = 0\n" +
           format_toml_flat(j);
}

HyperParams parse_hparams(std::string_view text) {
    auto j = parse_toml(text);
    HyperParams hp;
    try {
        hp.precision = j.at("precision").get<std::string>();
        hp.epochs = j.at("epochs").get<int>();
        hp.learning_rate = j.at("learning_rate").get<double>();
        hp.warmup_ratio = j.at("warmup_ratio").get<double>();
        hp.schedule = j.at("schedule").get<std::string>();
        hp.weight_decay = j.value("weight_decay", 0.0);
        hp.max_seq_len = j.at("max_seq_len").get<int>();
        hp.batch_size = j.at("batch_size").get<int>();
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("hparams: ") + ex.what());
    }
    hp.validate();
    return hp;
}

// ---- scoring ------------------------------------------------------------------------

std::string scoring_prompt(const TemporalQuestion& q, Year year) {
    PromptStrategy strat{ExampleKind::time_sensitive, true, year};
    static const FewShotSet shots = fixture_shots(ExampleKind::time_sensitive);
    return build_qa_prompt(q.text, strat, shots);
}

std::optional<double> score_correctness(ModelClient& client, const TemporalQuestion& q, Year year,
                                        const AlignmentConfig& cfg) {
    CompletionRequest req;
    req.prompt = scoring_prompt(q, year);
    req.max_tokens = cfg.max_tokens;
    req.temperature = cfg.sample_temperature;
    req.n_samples = cfg.n_samples;
    req.stop = {"\n\n"};
    CompletionResult res;
    try {
        res = client.complete(req);
    } catch (const TransportError&) {
        return std::nullopt;
    }
    double best = 0.0;
    for (const auto& text : res.texts) {
        auto pred = extract_answer(text, ExtractMode::plain).text;
        best = std::max(best, f1_at_year(pred, q, year, cfg.horizon));
    }
    return best;
}

std::optional<double> greedy_confidence(ModelClient& client, const TemporalQuestion& q, Year year,
                                        const AlignmentConfig& cfg) {
    if (!client.supports_logprobs()) throw CapabilityError("confidence selection needs token log-probabilities");
    CompletionRequest req;
    req.prompt = scoring_prompt(q, year);
    req.max_tokens = cfg.max_tokens;
    req.stop = {"\n\n"};
    req.want_logprobs = true;
    try {
        auto res = client.complete(req);
        if (res.mean_logprob.empty() || !res.mean_logprob[0]) {
            throw CapabilityError("client returned no log-probabilities");
        }
        return res.mean_logprob[0];
    } catch (const TransportError&) {
        return std::nullopt;
    }
}

namespace {

ScoreMap score_each(const std::vector<const TemporalQuestion*>& qs, std::size_t workers,
                    const std::function<std::optional<double>(const TemporalQuestion&)>& fn) {
    std::vector<std::optional<double>> scores(qs.size());
    parallel_for(qs.size(), workers, [&](std::size_t i) { scores[i] = fn(*qs[i]); });
    ScoreMap out;
    for (std::size_t i = 0; i < qs.size(); ++i) out[qs[i]->id] = scores[i];
    return out;
}

}  // namespace

ScoreMap score_all(ModelClient& client, const std::vector<const TemporalQuestion*>& qs, Year year,
                   const AlignmentConfig& cfg) {
    return score_each(qs, cfg.workers,
                      [&](const TemporalQuestion& q) { return score_correctness(client, q, year, cfg); });
}

ScoreMap confidence_all(ModelClient& client, const std::vector<const TemporalQuestion*>& qs, Year year,
                        const AlignmentConfig& cfg) {
    if (!client.supports_logprobs()) throw CapabilityError("confidence selection needs token log-probabilities");
    return score_each(qs, cfg.workers,
                      [&](const TemporalQuestion& q) { return greedy_confidence(client, q, year, cfg); });
}

std::vector<std::string> select_training(const std::vector<const TemporalQuestion*>& train,
                                         const SelectionInputs& inputs, const AlignmentConfig& cfg) {
    cfg.validate();
    if (cfg.select_k > train.size()) {
        throw SizingError("select_k = " + std::to_string(cfg.select_k) + " exceeds the " +
                          std::to_string(train.size()) + " training questions");
    }
    std::vector<std::pair<double, std::string>> ranked;
    std::vector<std::string> ids;
    for (const auto* q : train) {
        if (answers_at(*q, cfg.target_year, cfg.horizon).empty()) continue;
        std::optional<double> key;
        switch (cfg.strategy) {
            case SelectionStrategy::correctness: {
                auto it = inputs.correctness.find(q->id);
                if (it != inputs.correctness.end()) key = it->second;
                break;
            }
            case SelectionStrategy::confidence: {
                auto it = inputs.confidence.find(q->id);
                if (it != inputs.confidence.end()) key = it->second;
                break;
            }
            case SelectionStrategy::popularity: key = q->popularity; break;
            case SelectionStrategy::random: key = 0.0; break;
        }
        if (key) ranked.emplace_back(*key, q->id);
    }
    if (ranked.size() < cfg.select_k) {
        throw SizingError("only " + std::to_string(ranked.size()) + " candidates carry " + to_string(cfg.strategy) +
                          " inputs and an answer in " + std::to_string(cfg.target_year) + "; need " +
                          std::to_string(cfg.select_k));
    }
    if (cfg.strategy == SelectionStrategy::random) {
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
        std::mt19937_64 rng(cfg.seed);
        portable_shuffle(ranked, rng);
        ranked.resize(cfg.select_k);
        for (auto& r : ranked) ids.push_back(std::move(r.second));
        std::sort(ids.begin(), ids.end());
        return ids;
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; i < cfg.select_k; ++i) ids.push_back(std::move(ranked[i].second));
    return ids;
}

std::optional<Year> assign_adaptive_year(ModelClient& client, const TemporalQuestion& q, const AlignmentConfig& cfg) {
    for (Year y = cfg.cutoff_year; y >= cfg.epoch; --y) {
        if (answers_at(q, y, cfg.horizon).empty()) continue;
        auto s = score_correctness(client, q, y, cfg);
        if (!s) return std::nullopt;
        if (*s > cfg.adaptive_threshold) return y;
    }
    return std::nullopt;
}

std::map<std::string, std::optional<Year>> assign_all(ModelClient& client,
                                                      const std::vector<const TemporalQuestion*>& qs,
                                                      const AlignmentConfig& cfg) {
    std::vector<std::optional<Year>> years(qs.size());
    parallel_for(qs.size(), cfg.workers, [&](std::size_t i) { years[i] = assign_adaptive_year(client, *qs[i], cfg); });
    std::map<std::string, std::optional<Year>> out;
    for (std::size_t i = 0; i < qs.size(); ++i) out[qs[i]->id] = years[i];
    return out;
}

// ---- emission -----------------------------------------------------------------------

std::vector<TrainingExample> emit_target_year(const std::vector<std::string>& selected, const Dataset& ds, Year year,
                                              EmitReport* report) {
    std::vector<std::string> ids = selected;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<TrainingExample> out;
    for (const auto& id : ids) {
        const auto* q = ds.find(id);
        auto answer = q ? canonical_answer_at(*q, year, ds.horizon) : std::nullopt;
        if (!answer) {
            if (report) report->skipped.push_back(id);
            continue;
        }
        out.push_back({id, target_year_prompt(q->text), *answer, LossMask::answer_only, std::nullopt});
    }
    return out;
}

std::vector<TrainingExample> emit_adaptive(const std::map<std::string, std::optional<Year>>& assignments,
                                           const Dataset& ds, EmitReport* report) {
    std::vector<TrainingExample> out;
    for (const auto& [id, year] : assignments) {
        if (!year) continue;
        const auto* q = ds.find(id);
        if (!q) {
            if (report) report->skipped.push_back(id);
            continue;
        }
        auto answer = canonical_answer_at(*q, *year, ds.horizon);
        if (!answer) throw std::logic_error("question " + id + " has no answer in its assigned year");
        out.push_back({id, adaptive_prompt(q->text), adaptive_completion(*year, *answer), LossMask::full_output, year});
    }
    return out;
}

}  // namespace chronoforge
