#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

#include "chronoforge/model_client.hpp"
#include "chronoforge/temporal_kb.hpp"

namespace chronoforge {

/// Answer text that shares no token with any real answer.
inline constexpr std::string_view kUnknownEntity = "UNKNOWN-ENTITY";

struct StubOracleConfig {
    Year knowledge_year = 2019;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
};

/// Smallest answer valid at the latest year <= Y that has any answer, or
/// the unknown-entity sentinel.
std::string stub_answer(const TemporalQuestion& q, Year Y, Year horizon = kDefaultHorizon);

/// Deterministic stand-in for a model whose knowledge stops at a fixed year.
///
/// QA prompts are recognised by their last "Answer the following question:"
/// block; the lead-in after the question decides the reply:
///   "The answer is:"                 -> answer as of the knowledge year
///   "As of year y, the answer is:"   -> answer as of min(y, knowledge year)
///   nothing (prompt ends at "\n")    -> adaptive sentence for the latest known year
/// Question-generation prompts get the demonstration response when the query
/// table is one of the demonstrations, otherwise one templated question per
/// non-temporal column.
class StubOracle : public ModelClient {
public:
    StubOracle(std::shared_ptr<const Dataset> dataset, StubOracleConfig cfg);

    CompletionResult complete(const CompletionRequest& req) override;

    const StubOracleConfig& config() const { return cfg_; }
    std::size_t calls() const { return calls_.load(); }

private:
    std::string answer_qa(std::string_view prompt, std::size_t sample, bool sampled, bool* known) const;
    std::string answer_qg(std::string_view prompt) const;

    std::shared_ptr<const Dataset> ds_;
    StubOracleConfig cfg_;
    std::unordered_map<std::string, const TemporalQuestion*> by_text_;
    std::atomic<std::size_t> calls_{0};
};

}  // namespace chronoforge
