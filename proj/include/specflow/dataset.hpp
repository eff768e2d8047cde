#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specflow/actions.hpp"
#include "specflow/conveyor.hpp"
#include "specflow/flow_policy.hpp"

namespace specflow {

/// One expert episode: the observation before every executed raw action.
struct Demonstration {
    std::uint64_t seed = 0;
    double belt_speed = 0.0;
    int variant = 0;
    std::vector<Observation> observations;
    Eigen::MatrixXd actions;   // T x D raw expert labels
    Eigen::MatrixXd executed;  // T x D raw, labels plus execution noise
    bool success = false;

    int length() const { return static_cast<int>(actions.rows()); }
};

struct DatasetConfig {
    int episodes = 1000;
    std::string speed = "demo";
    double speed_jitter = 0.0;  // relative, uniform in [-j, j] per episode
    int horizon = 50;
    int replan = 12;
    int stride = 12;  // steps between consecutive training pairs
    // Correlated position noise added to executed actions during transport;
    // labels stay clean.
    double action_noise = 0.0;
    double noise_correlation = 0.9;
    // While the object is held, add copies of each pair conditioned on the
    // world features from replan and 2*replan ticks earlier.
    bool stale_augment = true;

    void validate() const;
};

struct Dataset {
    std::vector<Demonstration> demos;
    std::vector<FlowSample> pairs;  // standardized targets
    Standardizer actions;
    std::vector<std::uint64_t> excluded_seeds;  // expert failures
};

struct ExecutionNoise {
    double scale = 0.0;
    double correlation = 0.0;
};

Demonstration record_demonstration(const ConveyorConfig& cfg, double belt_speed, int variant,
                                   std::uint64_t seed, ExecutionNoise noise = {});

// Re-executes the executed actions from the initial state and compares every
// observation bit for bit.
bool replay_matches(const ConveyorConfig& cfg, const Demonstration& demo);

// One pair every `stride` steps and at every gripper switch, with the next
// `horizon` actions; steps past the
// end repeat the rest action and carry mask 0. Stale copies look back `replan`
// and 2*`replan` steps.
std::vector<FlowSample> chunk_demonstration(const Demonstration& demo, int horizon, int stride,
                                            int replan, const Standardizer& actions,
                                            bool stale_augment = false);

// Held: gripper closed with the object at the gripper position.
bool holding_object(const Observation& obs);

Dataset generate_dataset(const ConveyorConfig& env, const DatasetConfig& cfg, std::uint64_t seed);

}  // namespace specflow
