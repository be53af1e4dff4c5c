#include "chronoforge/config.hpp"

#include <set>

#include "chronoforge/toml.hpp"

namespace chronoforge {

namespace {

using json = nlohmann::json;

class Section {
public:
    Section(const json& root, std::string name) : name_(std::move(name)) {
        if (!root.contains(name_)) return;
        if (!root[name_].is_object()) throw ConfigError("[" + name_ + "] must be a table");
        obj_ = root[name_];
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!obj_.contains(key)) return;
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!obj_[key].is_number()) throw ConfigError("");
                out = obj_[key].template get<double>();
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!obj_[key].is_number_integer()) throw ConfigError("");
                auto v = obj_[key].template get<std::int64_t>();
                if constexpr (std::is_unsigned_v<T>) {
                    if (v < 0) throw ConfigError("");
                }
                out = static_cast<T>(v);
            } else {
                out = obj_[key].template get<T>();
            }
        } catch (const std::exception&) {
            throw ConfigError("[" + name_ + "] " + key + ": wrong type");
        }
    }

    void finish() const {
        for (const auto& [k, v] : obj_.items()) {
            if (!seen_.count(k)) throw ConfigError("[" + name_ + "] unknown key '" + k + "'");
        }
    }

private:
    std::string name_;
    json obj_ = json::object();
    std::set<std::string> seen_;
};

}  // namespace

RunConfig run_config_from_toml(std::string_view text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = parse_toml(text);
    } catch (const ParseError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    static const std::set<std::string> known = {"paths",      "run",      "client",   "stub",  "curation",
                                                "split",      "metrics",  "alignment", "eval", "pageviews",
                                                "audit"};
    for (const auto& [k, v] : root.items()) {
        if (!known.count(k)) throw ConfigError("unknown config section '" + k + "'");
    }

    RunConfig c;
    c.config_dir = base_dir;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : (base_dir / path).lexically_normal();
    };

    {
        Section s(root, "paths");
        std::string dump = "corpus", work = "work", cache;
        s.get("dump_root", dump);
        s.get("workdir", work);
        s.get("cache_dir", cache);
        s.finish();
        c.dump_root = resolve(dump);
        c.workdir = resolve(work);
        c.cache_dir = cache.empty() ? c.workdir / "cache" : resolve(cache);
    }
    {
        Section s(root, "run");
        s.get("workers", c.workers);
        s.get("filter_contemporary", c.filter_contemporary);
        s.finish();
        if (c.workers == 0) throw ConfigError("[run] workers must be positive");
    }
    {
        Section s(root, "client");
        s.get("kind", c.client.kind);
        s.get("base_url", c.client.base_url);
        s.get("model", c.client.model);
        s.get("max_in_flight", c.client.max_in_flight);
        s.get("max_retries", c.client.max_retries);
        s.get("timeout_s", c.client.timeout_s);
        s.finish();
        if (c.client.kind != "stub" && c.client.kind != "http") throw ConfigError("[client] kind must be stub or http");
        if (c.client.max_in_flight == 0) throw ConfigError("[client] max_in_flight must be positive");
    }
    {
        Section s(root, "stub");
        s.get("knowledge_year", c.stub.knowledge_year);
        s.get("noise_rate", c.stub.noise_rate);
        s.get("seed", c.stub.seed);
        s.finish();
        if (c.stub.noise_rate < 0 || c.stub.noise_rate > 1) throw ConfigError("[stub] noise_rate must be in [0, 1]");
    }
    {
        Section s(root, "curation");
        auto& k = c.curation;
        s.get("min_sensitivity", k.min_sensitivity);
        s.get("max_avg_answers_per_year", k.max_avg_answers_per_year);
        s.get("max_avg_answer_len", k.max_avg_answer_len);
        s.get("dup_hi", k.dup_hi);
        s.get("dup_q", k.dup_q);
        s.get("dup_a", k.dup_a);
        s.get("bias_occurrence_cap", k.bias_occurrence_cap);
        s.get("bias_keep_rate", k.bias_keep_rate);
        s.get("seed", k.seed);
        s.get("bm25_k1", k.bm25.k1);
        s.get("bm25_b", k.bm25.b);
        s.get("succession", k.succession);
        s.finish();
        k.workers = c.workers;
        try {
            k.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("[curation] ") + e.what());
        }
    }
    {
        Section s(root, "split");
        s.get("seed", c.split.seed);
        s.get("dev_size", c.split.dev_size);
        s.get("test_size", c.split.test_size);
        s.finish();
    }
    {
        Section s(root, "metrics");
        s.get("alpha", c.metrics.alpha);
        s.get("year_from", c.metrics.year_from);
        s.get("year_to", c.metrics.year_to);
        s.finish();
        try {
            c.metrics.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("[metrics] ") + e.what());
        }
    }
    {
        Section s(root, "alignment");
        auto& a = c.alignment;
        std::string strategy = to_string(a.strategy);
        s.get("target_year", a.target_year);
        s.get("n_samples", a.n_samples);
        s.get("select_k", a.select_k);
        s.get("adaptive_threshold", a.adaptive_threshold);
        s.get("cutoff_year", a.cutoff_year);
        s.get("strategy", strategy);
        s.get("seed", a.seed);
        s.get("sample_temperature", a.sample_temperature);
        s.get("max_tokens", a.max_tokens);
        s.finish();
        a.strategy = selection_strategy_from_name(strategy);
        a.workers = c.workers;
        try {
            a.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("[alignment] ") + e.what());
        }
    }
    {
        Section s(root, "eval");
        auto& e = c.eval;
        s.get("format", e.format);
        s.get("strategy", e.strategy);
        s.get("target_year", e.target_year);
        s.get("hit_threshold", e.hit_threshold);
        s.get("popularity_buckets", e.popularity_buckets);
        s.get("select_fewshot", e.select_fewshot);
        s.get("fewshot_trials", e.fewshot_trials);
        s.get("fewshot_pool", e.fewshot_pool);
        s.get("fewshot_dev_sample", e.fewshot_dev_sample);
        s.get("run_name", e.run_name);
        s.get("compare", e.compare);
        s.finish();
        prompt_format_from_name(e.format);
        strategy_from_name(e.strategy, e.target_year);
        if (e.hit_threshold <= 0 || e.hit_threshold > 1) throw ConfigError("[eval] hit_threshold must be in (0, 1]");
        if (e.popularity_buckets == 0) throw ConfigError("[eval] popularity_buckets must be positive");
        if (!e.compare.empty()) e.compare = resolve(e.compare).string();
    }
    {
        Section s(root, "pageviews");
        s.get("source", c.pageviews.source);
        s.get("seed", c.pageviews.seed);
        s.get("max_failure_rate", c.pageviews.max_failure_rate);
        s.finish();
        if (c.pageviews.source != "synthetic" && c.pageviews.source != "wikimedia") {
            throw ConfigError("[pageviews] source must be synthetic or wikimedia");
        }
    }
    {
        Section s(root, "audit");
        s.get("sample_size", c.audit.sample_size);
        s.get("seed", c.audit.seed);
        s.finish();
    }
    if (!std::filesystem::is_directory(c.dump_root)) {
        throw ConfigError("[paths] dump_root does not exist: " + c.dump_root.string());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception&) {
        throw ConfigError("cannot read config file " + path.string());
    }
    return run_config_from_toml(text, std::filesystem::absolute(path).parent_path());
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["workers"] = workers;
    j["filter_contemporary"] = filter_contemporary;
    j["client"] = {{"kind", client.kind},         {"base_url", client.base_url}, {"model", client.model},
                   {"max_retries", client.max_retries}};
    j["stub"] = {{"knowledge_year", stub.knowledge_year}, {"noise_rate", stub.noise_rate}, {"seed", stub.seed}};
    const auto& k = curation;
    j["curation"] = {{"min_sensitivity", k.min_sensitivity},
                     {"max_avg_answers_per_year", k.max_avg_answers_per_year},
                     {"max_avg_answer_len", k.max_avg_answer_len},
                     {"dup_hi", k.dup_hi},
                     {"dup_q", k.dup_q},
                     {"dup_a", k.dup_a},
                     {"bias_occurrence_cap", k.bias_occurrence_cap},
                     {"bias_keep_rate", k.bias_keep_rate},
                     {"seed", k.seed},
                     {"bm25_k1", k.bm25.k1},
                     {"bm25_b", k.bm25.b},
                     {"succession", k.succession}};
    j["split"] = {{"seed", split.seed}, {"dev_size", split.dev_size}, {"test_size", split.test_size}};
    j["metrics"] = {{"alpha", metrics.alpha}, {"year_from", metrics.year_from}, {"year_to", metrics.year_to}};
    const auto& a = alignment;
    j["alignment"] = {{"target_year", a.target_year},
                      {"n_samples", a.n_samples},
                      {"select_k", a.select_k},
                      {"adaptive_threshold", a.adaptive_threshold},
                      {"cutoff_year", a.cutoff_year},
                      {"strategy", to_string(a.strategy)},
                      {"seed", a.seed},
                      {"sample_temperature", a.sample_temperature},
                      {"max_tokens", a.max_tokens}};
    const auto& e = eval;
    j["eval"] = {{"format", e.format},
                 {"strategy", e.strategy},
                 {"target_year", e.target_year},
                 {"hit_threshold", e.hit_threshold},
                 {"popularity_buckets", e.popularity_buckets},
                 {"select_fewshot", e.select_fewshot},
                 {"fewshot_trials", e.fewshot_trials},
                 {"fewshot_pool", e.fewshot_pool},
                 {"fewshot_dev_sample", e.fewshot_dev_sample},
                 {"run_name", e.run_name},
                 {"compare", e.compare}};
    j["pageviews"] = {{"source", pageviews.source},
                      {"seed", pageviews.seed},
                      {"max_failure_rate", pageviews.max_failure_rate}};
    j["audit"] = {{"sample_size", audit.sample_size}, {"seed", audit.seed}};
    return j;
}

}  // namespace chronoforge
