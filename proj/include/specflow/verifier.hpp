#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "specflow/actions.hpp"
#include "specflow/flow_policy.hpp"

namespace specflow {

struct VerifierConfig {
    std::vector<double> timesteps{1.0 / 3.0, 2.0 / 3.0};
    double delta = 0.15;
    DistanceMetric metric = DistanceMetric::l2;
    int gripper_window = 0;  // 0 = whole chunk
    bool parallel = false;   // evaluate branches on worker threads

    // Throws unless every tau is in (0, 1), strictly increasing, and delta >= 0.
    void validate() const;
};

// K evenly spaced interior points k / (K + 1).
std::vector<double> evenly_spaced_timesteps(int count);

struct VerifierReport {
    std::vector<ActionChunk> reconstructed;  // one endpoint estimate per timestep
    Eigen::MatrixXd distances;               // K x H
    std::vector<int> branch_prefixes;
    int prefix = 0;
    bool gripper_switch_detected = false;
    std::uint64_t noise_seed = 0;
    int velocity_evaluations = 0;
};

// tau * draft + (1 - tau) * noise
ActionChunk interpolate(const ActionChunk& draft, const ActionChunk& noise, double tau);

// Single-step endpoint estimate A_tau + (1 - tau) * v(A_tau, tau).
ActionChunk reconstruct_endpoint(const VelocityField& field, const ActionChunk& draft,
                                 const ActionChunk& noise, double tau,
                                 const ConditioningCache& cache, const Eigen::VectorXd& robot_state);

// Longest leading run of distances <= delta.
int prefix_length(std::span<const double> distances, double delta);

/// Checks a draft against the main field under a (possibly stale) cache and the
/// fresh robot state. One noise chunk, drawn from `noise_seed`, is shared by
/// every branch; the result does not depend on branch scheduling.
VerifierReport verify(const VelocityField& field, const ActionChunk& draft,
                      const ConditioningCache& cache, const Eigen::VectorXd& robot_state,
                      const VerifierConfig& cfg, int current_gripper_sign,
                      std::uint64_t noise_seed);

}  // namespace specflow
