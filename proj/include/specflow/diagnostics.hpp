#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "specflow/flow_policy.hpp"
#include "specflow/verifier.hpp"

namespace specflow {

/// One sampled state: the observation the cache was captured from, the
/// current observation, and the draft proposed for it (standardized).
struct DiagnosticState {
    Observation stale;
    Observation fresh;
    ActionChunk draft;
};

struct Distribution {
    int count = 0;
    double mean = 0.0;
    double median = 0.0;
    double p90 = 0.0;
    double max = 0.0;

    static Distribution of(std::vector<double> values);
};

struct ErrorDecomposition {
    Distribution eps_ae;    // endpoint gap of the full-denoise chunk, fresh cache
    Distribution eps_cond;  // the same gap with the stale cache, minus eps_ae
    Distribution endpoint;  // max per-step |draft - A*| over the accepted prefix
    int states = 0;
    int accepted = 0;
    double exceed_fraction = 0.0;  // accepted drafts with endpoint > delta + eps_ae + eps_cond
};

using EncodeFn = std::function<ConditioningCache(const Observation&)>;

// A* is the full denoise under the fresh cache. Each gap is the max per-step
// distance between A* and its single-step reconstructions at the verifier
// timesteps, with noise shared across branches.
ErrorDecomposition measure_error_decomposition(const VelocityField& field, const EncodeFn& encode,
                                               const std::vector<DiagnosticState>& states,
                                               const VerifierConfig& verifier, const DenoiseConfig& denoise,
                                               std::uint64_t seed);

nlohmann::json to_json(const ErrorDecomposition& d);

}  // namespace specflow
