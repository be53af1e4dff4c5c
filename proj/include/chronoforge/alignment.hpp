#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronoforge/model_client.hpp"
#include "chronoforge/temporal_kb.hpp"

namespace chronoforge {

enum class SelectionStrategy { correctness, popularity, confidence, random };

SelectionStrategy selection_strategy_from_name(std::string_view name);
const char* to_string(SelectionStrategy s);

struct AlignmentConfig {
    Year target_year = 2022;
    int n_samples = 10;
    std::size_t select_k = 5000;
    double adaptive_threshold = 0.7;
    Year cutoff_year = 2022;
    SelectionStrategy strategy = SelectionStrategy::correctness;
    std::uint64_t seed = 0;
    double sample_temperature = 1.0;
    int max_tokens = 32;
    std::size_t workers = 8;
    Year epoch = kDefaultEpoch;
    Year horizon = kDefaultHorizon;

    void validate() const;
};

enum class LossMask { answer_only, full_output };
const char* to_string(LossMask m);
LossMask loss_mask_from_string(std::string_view s);

struct TrainingExample {
    std::string id;
    std::string prompt;
    std::string completion;
    LossMask loss_mask = LossMask::answer_only;
    std::optional<Year> assigned_year;

    friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

nlohmann::ordered_json example_to_json(const TrainingExample& e);
TrainingExample example_from_json(const nlohmann::json& j);
std::string examples_to_jsonl(const std::vector<TrainingExample>& examples);
std::vector<TrainingExample> examples_from_jsonl(std::string_view text);

struct HyperParams {
    std::string precision = "bfloat16";
    int epochs = 2;
    double learning_rate = 5e-6;
    double warmup_ratio = 0.03;
    std::string schedule = "linear_decay";
    double weight_decay = 0.0;
    int max_seq_len = 128;
    int batch_size = 128;

    void validate() const;
    friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

std::string emit_hparams(const HyperParams& hp = {});
HyperParams parse_hparams(std::string_view text);

// ---- scoring ------------------------------------------------------------------------

/// Time-aware prompt used for correctness sampling and confidence.
std::string scoring_prompt(const TemporalQuestion& q, Year year);

/// Best F^year over cfg.n_samples sampled completions; nullopt when the
/// client fails after its retries.
std::optional<double> score_correctness(ModelClient& client, const TemporalQuestion& q, Year year,
                                        const AlignmentConfig& cfg);

/// Mean token log-probability of the greedy completion. Throws
/// CapabilityError when the client cannot report log-probabilities.
std::optional<double> greedy_confidence(ModelClient& client, const TemporalQuestion& q, Year year,
                                        const AlignmentConfig& cfg);

using ScoreMap = std::map<std::string, std::optional<double>>;

ScoreMap score_all(ModelClient& client, const std::vector<const TemporalQuestion*>& qs, Year year,
                   const AlignmentConfig& cfg);
ScoreMap confidence_all(ModelClient& client, const std::vector<const TemporalQuestion*>& qs, Year year,
                        const AlignmentConfig& cfg);

struct SelectionInputs {
    ScoreMap correctness;
    ScoreMap confidence;
};

/// Top select_k ids under the configured strategy, in rank order (random:
/// id order). Candidates must have answers at the target year; candidates
/// lacking the strategy's input are skipped. Throws SizingError when fewer
/// than select_k candidates remain.
std::vector<std::string> select_training(const std::vector<const TemporalQuestion*>& train,
                                         const SelectionInputs& inputs, const AlignmentConfig& cfg);

/// Latest year from cutoff_year down to epoch whose correctness score
/// strictly exceeds adaptive_threshold.
std::optional<Year> assign_adaptive_year(ModelClient& client, const TemporalQuestion& q, const AlignmentConfig& cfg);

std::map<std::string, std::optional<Year>> assign_all(ModelClient& client,
                                                      const std::vector<const TemporalQuestion*>& qs,
                                                      const AlignmentConfig& cfg);

// ---- emission -----------------------------------------------------------------------

struct EmitReport {
    std::vector<std::string> skipped;  // ids without an answer at the year, or unknown
};

std::vector<TrainingExample> emit_target_year(const std::vector<std::string>& selected, const Dataset& ds, Year year,
                                              EmitReport* report = nullptr);

/// Throws std::logic_error when an assigned year has no answer.
std::vector<TrainingExample> emit_adaptive(const std::map<std::string, std::optional<Year>>& assignments,
                                           const Dataset& ds, EmitReport* report = nullptr);

}  // namespace chronoforge
