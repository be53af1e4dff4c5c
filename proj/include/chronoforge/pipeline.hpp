#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronoforge/config.hpp"
#include "chronoforge/model_client.hpp"

namespace chronoforge {

/// Per-invocation overrides from the command line.
struct StageOptions {
    std::optional<std::string> strategy;
    std::optional<Year> target_year;
    std::optional<double> hit_threshold;
    std::optional<std::string> compare;
    std::optional<std::string> run_name;
    bool force = false;
};

struct StageResult {
    std::string stage;
    bool skipped = false;  // manifest matched; nothing recomputed
    std::vector<std::string> outputs;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
};

/// Stages in pipeline order (stub-serve excluded).
const std::vector<std::string>& pipeline_stages();

/// Runs one stage. Throws StageInputMissing, ConfigError, SizingError or
/// TransportError (when every model request failed).
StageResult run_stage(const std::string& stage, const RunConfig& cfg, const StageOptions& opts = {});

/// The model client configured by `cfg`, wrapped in the on-disk cache.
/// `dataset` backs the stub oracle and may be null for question generation.
std::shared_ptr<ModelClient> make_client(const RunConfig& cfg, std::shared_ptr<const Dataset> dataset);

/// Stable content hash of every file under `root` (relative paths included).
std::uint64_t hash_tree(const std::filesystem::path& root);

}  // namespace chronoforge
