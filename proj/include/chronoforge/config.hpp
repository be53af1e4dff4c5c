#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "chronoforge/alignment.hpp"
#include "chronoforge/curation.hpp"
#include "chronoforge/eval_harness.hpp"
#include "chronoforge/metrics.hpp"
#include "chronoforge/stub_oracle.hpp"
#include "chronoforge/temporal_kb.hpp"

namespace chronoforge {

struct ClientSettings {
    std::string kind = "stub";  // "stub" or "http"
    std::string base_url = "http://127.0.0.1:8089";
    std::string model = "default";
    std::size_t max_in_flight = 8;
    int max_retries = 5;
    int timeout_s = 60;
};

struct EvalSettings {
    std::string format = "fewshot";
    std::string strategy = "sensitive-time";
    Year target_year = 2022;
    double hit_threshold = 0.8;
    std::size_t popularity_buckets = 5;
    bool select_fewshot = false;
    std::size_t fewshot_trials = 20;
    std::size_t fewshot_pool = 200;
    std::size_t fewshot_dev_sample = 200;
    std::string run_name;  // default derived from format/strategy/year
    std::string compare;   // baseline records file
};

struct PageviewSettings {
    std::string source = "synthetic";  // or "wikimedia"
    std::uint64_t seed = 0;
    double max_failure_rate = 0.5;
};

struct AuditSettings {
    std::size_t sample_size = 50;
    std::uint64_t seed = 0;
};

struct RunConfig {
    std::filesystem::path config_dir;
    std::filesystem::path dump_root;
    std::filesystem::path workdir;
    std::filesystem::path cache_dir;
    std::size_t workers = 4;
    bool filter_contemporary = true;

    ClientSettings client;
    StubOracleConfig stub;
    CurationConfig curation;
    SplitConfig split;
    MetricConfig metrics;
    AlignmentConfig alignment;
    EvalSettings eval;
    PageviewSettings pageviews;
    AuditSettings audit;

    /// Normalized settings, used for manifests.
    nlohmann::ordered_json to_json() const;
};

/// Relative paths are resolved against the directory of the config file.
/// Throws ConfigError on unknown keys, bad values or a missing dump root.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_toml(std::string_view text, const std::filesystem::path& base_dir);

}  // namespace chronoforge
