#include "chronoforge/prompting.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>

#include "chronoforge/metrics.hpp"

namespace chronoforge {

void PromptStrategy::validate() const {
    if ((mention_time || example_kind == ExampleKind::time_sensitive) && !target_year) {
        throw std::invalid_argument("prompt strategy '" + strategy_name(*this) + "' needs a target year");
    }
}

PromptStrategy strategy_from_name(std::string_view name, std::optional<Year> target_year) {
    PromptStrategy s;
    s.target_year = target_year;
    if (name == "insensitive") {
        s.example_kind = ExampleKind::time_insensitive;
    } else if (name == "insensitive-time") {
        s.example_kind = ExampleKind::time_insensitive;
        s.mention_time = true;
    } else if (name == "sensitive") {
        s.example_kind = ExampleKind::time_sensitive;
    } else if (name == "sensitive-time") {
        s.example_kind = ExampleKind::time_sensitive;
        s.mention_time = true;
    } else {
        throw std::invalid_argument("unknown prompt strategy '" + std::string(name) + "'");
    }
    return s;
}

std::string strategy_name(const PromptStrategy& s) {
    std::string name = s.example_kind == ExampleKind::time_sensitive ? "sensitive" : "insensitive";
    if (s.mention_time) name += "-time";
    return name;
}

void FewShotSet::validate() const {
    if (examples.size() != 5) {
        throw std::invalid_argument("few-shot set needs exactly 5 examples, got " + std::to_string(examples.size()));
    }
}

FewShotSet fixture_shots(ExampleKind kind) {
    FewShotSet s;
    if (kind == ExampleKind::time_insensitive) {
        s.examples = {
            {"What is the capital of France?", "Paris"},
            {"Who wrote Harry Potter?", "J.K. Rowling"},
            {"Where did the Titanic sink?", "Atlantic Ocean"},
            {"What is the gravity of earth?", "9.807 m/s^2"},
            {"Is the speed of light faster than the speed of sound?", "Yes"},
        };
    } else {
        s.examples = {
            {"Which Hindi film has the highest domestic net collection currently?", "Brahmāstra: Part One – Shiva"},
            {"Where is the NHL Winter Classic taking place?", "Target Field"},
            {"Who are the current drivers for the Mercedes-Benz Formula One team?", "Lewis Hamilton George Russell"},
            {"Who received the Player of the Game award for offense in the most recent Rose Bowl Game?",
             "Jaxon Smith-Njigba"},
            {"Where was the final of the last FIFA Club World Cup held?", "Prince Moulay Abdellah Stadium, Rabat"},
        };
    }
    return s;
}

std::string lead_in(std::optional<Year> year) {
    if (!year) return std::string(kPlainLeadIn);
    return "As of year " + std::to_string(*year) + ", the answer is:";
}

std::string build_qa_prompt(std::string_view question, const PromptStrategy& strat, const FewShotSet& shots) {
    strat.validate();
    shots.validate();
    const std::string li = lead_in(strat.mention_time ? strat.target_year : std::nullopt);
    std::string out;
    for (const auto& ex : shots.examples) {
        out += kQuestionPrefix;
        out += ex.question;
        out += '\n';
        out += li;
        out += ' ';
        out += ex.answer;
        out += "\n\n";
    }
    out += kQuestionPrefix;
    out += question;
    out += '\n';
    out += li;
    return out;
}

std::string target_year_prompt(std::string_view question) {
    return std::string(kQuestionPrefix) + std::string(question) + "\n" + std::string(kPlainLeadIn);
}

std::string adaptive_prompt(std::string_view question) {
    return std::string(kQuestionPrefix) + std::string(question) + "\n";
}

std::string adaptive_completion(Year year, std::string_view answer) {
    return "Based on my latest knowledge for this question from year " + std::to_string(year) +
           ", the answer is: " + std::string(answer);
}

// ---------------------------------------------------------------------------

namespace {

std::string first_line(std::string_view s) {
    std::size_t start = s.find_first_not_of(" \t\r\n");
    if (start == std::string_view::npos) return "";
    s.remove_prefix(start);
    return trim(s.substr(0, s.find('\n')));
}

}  // namespace

ExtractedAnswer extract_answer(std::string_view raw, ExtractMode mode) {
    if (mode == ExtractMode::plain) return {first_line(raw), false};
    const std::string lower = to_lower_ascii(raw);
    auto pos = lower.rfind(kAnswerMarker);
    if (pos == std::string::npos) return {first_line(raw), true};
    std::string_view rest = raw.substr(pos + kAnswerMarker.size());
    return {trim(rest.substr(0, rest.find('\n'))), false};
}

std::optional<std::pair<Year, std::string>> parse_adaptive_completion(std::string_view text) {
    static constexpr std::string_view head = "Based on my latest knowledge for this question from year ";
    static constexpr std::string_view mid = ", the answer is: ";
    if (text.substr(0, head.size()) != head) return std::nullopt;
    text.remove_prefix(head.size());
    auto comma = text.find(mid);
    if (comma == std::string_view::npos || comma == 0 || comma > 6) return std::nullopt;
    Year y = 0;
    for (char c : text.substr(0, comma)) {
        if (c < '0' || c > '9') return std::nullopt;
        y = y * 10 + (c - '0');
    }
    return std::pair{y, std::string(text.substr(comma + mid.size()))};
}

// ---------------------------------------------------------------------------

FewShotSelection select_fewshot(ModelClient& client, const std::vector<const TemporalQuestion*>& train,
                                const std::vector<const TemporalQuestion*>& dev, const PromptStrategy& strat,
                                const FewShotConfig& cfg) {
    strat.validate();
    if (dev.empty()) throw std::invalid_argument("few-shot selection needs a non-empty dev set");
    if (cfg.trials == 0) throw std::invalid_argument("few-shot selection needs at least one trial");
    const Year target = *strat.target_year;

    FewShotSelection sel;
    sel.seed = cfg.seed;
    sel.trials = cfg.trials;

    std::vector<const TemporalQuestion*> ranked;
    for (const auto* q : train) {
        if (q->popularity) ranked.push_back(q);
    }
    std::sort(ranked.begin(), ranked.end(), [](const TemporalQuestion* a, const TemporalQuestion* b) {
        if (*a->popularity != *b->popularity) return *a->popularity > *b->popularity;
        return a->id < b->id;
    });
    if (ranked.size() < train.size()) {
        sel.warnings.push_back(std::to_string(train.size() - ranked.size()) +
                               " train questions lack popularity and are not eligible as shots");
    }
    if (ranked.size() < cfg.pool_size) {
        sel.warnings.push_back("pool size " + std::to_string(cfg.pool_size) + " exceeds the " +
                               std::to_string(ranked.size()) + " ranked train questions; using all of them");
    } else {
        ranked.resize(cfg.pool_size);
    }

    std::vector<QAPair> pool;
    for (const auto* q : ranked) {
        if (auto a = canonical_answer_at(*q, target, cfg.horizon)) pool.push_back({q->text, *a});
    }
    if (pool.size() < 5) {
        throw SizingError("only " + std::to_string(pool.size()) + " pool questions have an answer in " +
                          std::to_string(target) + "; 5 are needed");
    }

    std::vector<const TemporalQuestion*> dev_set = dev;
    std::sort(dev_set.begin(), dev_set.end(),
              [](const TemporalQuestion* a, const TemporalQuestion* b) { return a->id < b->id; });
    std::mt19937_64 rng(cfg.seed);
    if (cfg.dev_sample && *cfg.dev_sample < dev_set.size()) {
        portable_shuffle(dev_set, rng);
        dev_set.resize(*cfg.dev_sample);
        std::sort(dev_set.begin(), dev_set.end(),
                  [](const TemporalQuestion* a, const TemporalQuestion* b) { return a->id < b->id; });
    }

    std::vector<std::size_t> order(pool.size());
    double best_score = -1.0;
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        std::iota(order.begin(), order.end(), 0);
        portable_shuffle(order, rng);
        FewShotSet draw;
        draw.source = "selected";
        for (std::size_t k = 0; k < 5; ++k) draw.examples.push_back(pool[order[k]]);

        std::vector<double> scores(dev_set.size(), 0.0);
        parallel_for(dev_set.size(), cfg.workers, [&](std::size_t i) {
            CompletionRequest req;
            req.prompt = build_qa_prompt(dev_set[i]->text, strat, draw);
            req.temperature = 0.0;
            req.stop = {"\n\n"};
            auto res = client.complete(req);
            auto pred = extract_answer(res.texts.at(0), ExtractMode::plain).text;
            scores[i] = f1_at_year(pred, *dev_set[i], target, cfg.horizon);
        });
        double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
        sel.trial_scores.push_back(mean);
        if (mean > best_score) {
            best_score = mean;
            sel.shots = draw;
        }
    }
    sel.dev_score = best_score;
    return sel;
}

nlohmann::ordered_json selection_to_json(const FewShotSelection& s, const PromptStrategy& strat) {
    nlohmann::ordered_json j;
    j["strategy"] = strategy_name(strat);
    j["target_year"] = strat.target_year ? nlohmann::ordered_json(*strat.target_year) : nullptr;
    j["source"] = s.shots.source;
    j["seed"] = s.seed;
    j["trials"] = s.trials;
    j["dev_score"] = s.dev_score;
    j["trial_scores"] = s.trial_scores;
    auto shots = nlohmann::ordered_json::array();
    for (const auto& ex : s.shots.examples) shots.push_back({{"question", ex.question}, {"answer", ex.answer}});
    j["shots"] = std::move(shots);
    return j;
}

FewShotSet shots_from_json(const nlohmann::json& j) {
    FewShotSet s;
    s.source = j.value("source", "selected");
    for (const auto& ex : j.at("shots")) {
        s.examples.push_back({ex.at("question").get<std::string>(), ex.at("answer").get<std::string>()});
    }
    s.validate();
    return s;
}

}  // namespace chronoforge
