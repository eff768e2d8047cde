#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specflow/actions.hpp"
#include "specflow/flow_policy.hpp"
#include "specflow/nn.hpp"

namespace specflow {

/// Lightweight proposer: one forward pass from the fresh observation to a
/// whole standardized H x D chunk.
class DraftModel {
public:
    DraftModel(PolicyShape shape, FeatureScalers scalers, const std::vector<int>& hidden, Rng& rng);
    DraftModel(PolicyShape shape, FeatureScalers scalers, nn::Mlp net);

    const PolicyShape& shape() const { return shape_; }
    const FeatureScalers& scalers() const { return scalers_; }
    const nn::Mlp& net() const { return net_; }
    nn::Mlp& net() { return net_; }

    Eigen::VectorXd input(const Observation& obs) const;
    ActionChunk propose(const Observation& obs) const;

private:
    PolicyShape shape_;
    FeatureScalers scalers_;
    nn::Mlp net_;
};

// Throws unless the draft has under half the main model's parameters and
// under a fifth of the forward FLOPs of one full denoise (encoder + N field passes).
void check_draft_budget(const DraftModel& draft, const FlowPolicy& main, int denoise_steps);

double smooth_l1(double x, double y, double beta);
// d smooth_l1 / dx
double smooth_l1_grad(double x, double y, double beta);

// w_h = gamma^(h-1) for h <= P, tail_weight beyond. Index 0 is step 1.
Eigen::VectorXd prefix_weights(int prefix, int horizon, double gamma, double tail_weight);

enum class TargetSource { teacher, demo };

std::string to_string(TargetSource source);
TargetSource parse_target_source(const std::string& name);

struct DraftTrainConfig {
    double beta = 1.0;
    double gamma_prefix = 0.9;
    double tail_weight = 0.1;
    int max_prefix = 16;
    int epochs = 100;
    int batch_size = 64;
    nn::AdamWParams optim{2e-3, 0.01};
    double lr_floor_ratio = 0.005;
    double validation_fraction = 0.1;
    int select_steps = 12;  // checkpoint metric: RMS over the first executable steps
    TargetSource target_source = TargetSource::teacher;

    void validate(int horizon) const;
};

struct DraftSample {
    Observation obs;
    Eigen::MatrixXd target;  // standardized H x D
    Eigen::VectorXd mask;
};

// Weighted loss for one batch: sum_h w_h * mean_d smooth_l1, averaged over
// samples. `output` columns are flattened chunks.
double draft_loss(const Eigen::MatrixXd& output, const Eigen::MatrixXd& target,
                  const Eigen::MatrixXd& mask, const Eigen::VectorXd& step_weights, int dims,
                  double beta, Eigen::MatrixXd* output_grad);

// Teacher targets: the main policy's full-path output for each observation,
// with a dedicated noise stream per sample. Demonstration actions are never read.
std::vector<DraftSample> teacher_targets(const FlowPolicy& main, std::span<const FlowSample> data,
                                         const DenoiseConfig& denoise, std::uint64_t seed);
std::vector<DraftSample> demo_targets(std::span<const FlowSample> data);

struct DraftTrainResult {
    std::vector<double> train_loss;
    std::vector<double> validation_rms;
    int best_epoch = -1;
    double best_validation_rms = 0.0;
};

// RMS over the first `steps` steps (all channels), masked.
double chunk_rms(const DraftModel& model, std::span<const DraftSample> samples, int steps);

// Trains in place and restores the parameters of the epoch with the best
// validation RMS.
DraftTrainResult train_draft(DraftModel& model, std::span<const DraftSample> samples,
                             const DraftTrainConfig& cfg, Rng& rng);

}  // namespace specflow
