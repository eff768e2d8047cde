#include "specflow/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <stdexcept>

#include "specflow/phase.hpp"

namespace specflow {

void VerifierConfig::validate() const {
    if (timesteps.empty()) {
        throw std::invalid_argument("verifier: need at least one timestep");
    }
    for (std::size_t k = 0; k < timesteps.size(); ++k) {
        if (!(timesteps[k] > 0.0 && timesteps[k] < 1.0)) {
            throw std::invalid_argument("verifier: timesteps must lie in (0, 1)");
        }
        if (k > 0 && !(timesteps[k] > timesteps[k - 1])) {
            throw std::invalid_argument("verifier: timesteps must be strictly increasing");
        }
    }
    if (!(delta >= 0.0)) {
        throw std::invalid_argument("verifier: delta must be non-negative");
    }
    if (gripper_window < 0) {
        throw std::invalid_argument("verifier: gripper window must be non-negative");
    }
}

std::vector<double> evenly_spaced_timesteps(int count) {
    if (count < 1) throw std::invalid_argument("timestep count must be positive");
    std::vector<double> out;
    for (int k = 1; k <= count; ++k) out.push_back(static_cast<double>(k) / (count + 1));
    return out;
}

ActionChunk interpolate(const ActionChunk& draft, const ActionChunk& noise, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("interpolate: tau out of [0, 1]");
    }
    if (draft.horizon() != noise.horizon() || !(draft.layout() == noise.layout())) {
        throw std::invalid_argument("interpolate: shape mismatch");
    }
    return ActionChunk(tau * draft.values() + (1.0 - tau) * noise.values(), draft.layout(),
                       ActionSpace::standardized);
}

ActionChunk reconstruct_endpoint(const VelocityField& field, const ActionChunk& draft,
                                 const ActionChunk& noise, double tau,
                                 const ConditioningCache& cache, const Eigen::VectorXd& robot_state) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw std::invalid_argument("reconstruct_endpoint: tau must lie in (0, 1)");
    }
    const ActionChunk noisy = interpolate(draft, noise, tau);
    const ActionChunk v = field.velocity(noisy, tau, cache, robot_state);
    Eigen::MatrixXd out = noisy.values() + (1.0 - tau) * v.values();
    if (!out.allFinite()) {
        throw std::runtime_error("reconstruct_endpoint: non-finite reconstruction");
    }
    return ActionChunk(std::move(out), draft.layout(), ActionSpace::standardized);
}

int prefix_length(std::span<const double> distances, double delta) {
    int n = 0;
    for (double d : distances) {
        if (!(d <= delta)) break;
        ++n;
    }
    return n;
}

VerifierReport verify(const VelocityField& field, const ActionChunk& draft,
                      const ConditioningCache& cache, const Eigen::VectorXd& robot_state,
                      const VerifierConfig& cfg, int current_gripper_sign,
                      std::uint64_t noise_seed) {
    cfg.validate();
    if (draft.space() != ActionSpace::standardized) {
        throw std::invalid_argument("verify: draft must be standardized");
    }
    Rng rng(noise_seed);
    const ActionChunk noise = sample_noise(draft.horizon(), draft.layout(), rng);

    const auto k_count = cfg.timesteps.size();
    auto branch = [&](std::size_t k) {
        return reconstruct_endpoint(field, draft, noise, cfg.timesteps[k], cache, robot_state);
    };
    std::vector<std::optional<ActionChunk>> slots(k_count);
    if (cfg.parallel && k_count > 1) {
        std::vector<std::future<ActionChunk>> jobs;
        for (std::size_t k = 0; k < k_count; ++k) {
            jobs.push_back(std::async(std::launch::async, branch, k));
        }
        for (std::size_t k = 0; k < k_count; ++k) slots[k].emplace(jobs[k].get());
    } else {
        for (std::size_t k = 0; k < k_count; ++k) slots[k].emplace(branch(k));
    }

    VerifierReport report;
    report.noise_seed = noise_seed;
    report.velocity_evaluations = static_cast<int>(k_count);
    report.distances.resize(static_cast<Eigen::Index>(k_count), draft.horizon());
    report.prefix = static_cast<int>(draft.horizon());
    for (std::size_t k = 0; k < k_count; ++k) {
        report.reconstructed.push_back(std::move(*slots[k]));
        const ActionChunk& rec = report.reconstructed.back();
        std::vector<double> d(static_cast<std::size_t>(draft.horizon()));
        for (Eigen::Index h = 0; h < draft.horizon(); ++h) {
            d[static_cast<std::size_t>(h)] = continuous_distance(draft, rec, h, cfg.metric);
            report.distances(static_cast<Eigen::Index>(k), h) = d[static_cast<std::size_t>(h)];
        }
        const int lk = prefix_length(d, cfg.delta);
        report.branch_prefixes.push_back(lk);
        report.prefix = std::min(report.prefix, lk);
    }

    std::vector<const ActionChunk*> scanned{&draft};
    for (const auto& rec : report.reconstructed) scanned.push_back(&rec);
    report.gripper_switch_detected =
        detect_gripper_switch(scanned, current_gripper_sign, cfg.gripper_window);
    return report;
}

}  // namespace specflow
