#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "specflow/actions.hpp"
#include "specflow/conveyor.hpp"
#include "specflow/draft.hpp"
#include "specflow/flow_policy.hpp"
#include "specflow/latency.hpp"
#include "specflow/verifier.hpp"

namespace specflow {

enum class RunMode { full_only, flash };
enum class FallbackLatency { additive, full_only };
enum class RoundKind { full, flash_accepted, flash_rejected_fallback, flash_phase_fallback, periodic_refresh };

std::string to_string(RunMode mode);
std::string to_string(FallbackLatency mode);
std::string to_string(RoundKind kind);
RunMode parse_run_mode(const std::string& name);
FallbackLatency parse_fallback_latency(const std::string& name);
RoundKind parse_round_kind(const std::string& name);

struct RuntimePolicy {
    RunMode mode = RunMode::flash;
    int replan = 12;
    int periodic_refresh = 2;  // flash rounds allowed between full rounds; 0 = off
    bool phase_fallback = true;
    bool cap_prefix_at_replan = true;
    FallbackLatency fallback_latency = FallbackLatency::additive;
    VerifierConfig verifier;
    DenoiseConfig denoise;

    void validate(int horizon) const;
};

struct PolicyModels {
    FlowPolicy main;
    std::optional<DraftModel> draft;
    Standardizer actions;
};

struct VerifierSummary {
    int prefix = 0;
    std::vector<int> branch_prefixes;
    bool gripper_switch = false;
    std::uint64_t noise_seed = 0;
    double max_distance = 0.0;  // over the accepted prefix, all branches
};

struct RoundRecord {
    int round = 0;
    long tick = 0;  // world tick when the round started
    Phase phase = Phase::approach;
    RoundKind path = RoundKind::full;
    int executed_prefix = 0;
    double latency_ms = 0.0;
    int stall_ticks = 0;
    int cache_round = -1;  // round the conditioning used for verification came from
    std::optional<VerifierSummary> verifier;
};

struct EpisodeStats {
    bool success = false;
    int rounds = 0;
    int flash_accepted = 0;
    double flash_rate = 0.0;
    double acc = 0.0;
    double latency_ms = 0.0;
    double per_action_ms = 0.0;
    double total_latency_ms = 0.0;
    long executed_actions = 0;
};

// Pure fold over a round trace.
EpisodeStats stats_from_trace(const std::vector<RoundRecord>& trace, int replan, bool success);

struct EpisodeResult {
    EpisodeStats stats;
    std::vector<RoundRecord> trace;
    FailureReason failure = FailureReason::none;
    long ticks = 0;
};

class EpisodeError : public std::runtime_error {
public:
    EpisodeError(const std::string& what, std::vector<RoundRecord> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<RoundRecord>& trace() const { return trace_; }

private:
    std::vector<RoundRecord> trace_;
};

struct RunnerState {
    std::optional<ConditioningCache> cache;
    int flash_since_full = 0;
    int last_full_round = -1;
};

struct FullOutput {
    ActionChunk chunk;  // standardized
    ConditioningCache cache;
};

// Encode the fresh observation, then denoise.
FullOutput full_round(const Observation& obs, const PolicyModels& models, const DenoiseConfig& cfg,
                      int round, long tick, Rng& rng);

enum class FlashVerdict { accept, reject, phase_switch };

struct FlashOutput {
    ActionChunk draft;  // standardized
    VerifierReport report;
    FlashVerdict verdict = FlashVerdict::reject;
    int executable = 0;  // min(L, R) when accepted
};

// Draft on the fresh observation, verification against the stale cache with the
// fresh robot state. Throws when no cache exists.
FlashOutput flash_round(const Observation& obs, const PolicyModels& models,
                        const RuntimePolicy& policy, const RunnerState& state,
                        std::uint64_t noise_seed);

int current_gripper_sign(const Observation& obs, const Standardizer& actions);

EpisodeResult run_episode(ConveyorEnv& env, const RuntimePolicy& policy, const PolicyModels& models,
                          const CostProfile& profile, const LatencyCoupling& coupling,
                          std::uint64_t seed);

}  // namespace specflow
