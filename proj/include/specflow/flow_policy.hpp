#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "specflow/actions.hpp"
#include "specflow/nn.hpp"
#include "specflow/rng.hpp"

namespace specflow {

struct Observation {
    Eigen::VectorXd world_features;  // object position, object velocity, bin position
    int task_id = 0;
    Eigen::VectorXd robot_state;     // gripper position, open/closed
};

/// Embedding captured by a full-path round and reused by later flash rounds.
struct ConditioningCache {
    Eigen::VectorXd embedding;
    int captured_round = 0;
    long captured_tick = 0;
};

struct PolicyShape {
    int horizon = 50;
    ChannelLayout layout;
    int world_dims = 5;
    int state_dims = 3;
    int num_tasks = 2;
    int embedding_dims = 32;

    int chunk_size() const { return horizon * layout.dims(); }
    void validate() const;
    bool operator==(const PolicyShape&) const = default;
};

struct FeatureScalers {
    Standardizer world;
    Standardizer state;
};

Eigen::VectorXd one_hot(int index, int count);

/// v(A_tau, tau | cache, state). Implementations only see validated inputs.
class VelocityField {
public:
    virtual ~VelocityField() = default;

    virtual Eigen::Index horizon() const = 0;
    virtual ChannelLayout layout() const = 0;

    // Throws on tau outside [0, 1] or a chunk that is raw or mis-shaped.
    ActionChunk velocity(const ActionChunk& noisy, double tau, const ConditioningCache& cache,
                         const Eigen::VectorXd& robot_state) const;

protected:
    virtual Eigen::MatrixXd evaluate(const Eigen::MatrixXd& noisy, double tau,
                                     const ConditioningCache& cache,
                                     const Eigen::VectorXd& robot_state) const = 0;
};

/// The main policy: context encoder plus flow-matching velocity network.
/// The network predicts an endpoint x; the velocity is
/// (x - skip_gain * A_tau) / max(1 - tau, kMinGap).
class FlowPolicy final : public VelocityField {
public:
    static constexpr int kTimeFeatures = 5;
    static constexpr double kMinGap = 0.1;

    struct Architecture {
        std::vector<int> encoder_hidden{64};
        std::vector<int> field_hidden{256, 256};
    };

    FlowPolicy(PolicyShape shape, const Architecture& arch, Rng& rng);
    FlowPolicy(PolicyShape shape, FeatureScalers scalers, nn::Mlp encoder, nn::Mlp field,
               double skip_gain = 1.0);

    const PolicyShape& shape() const { return shape_; }
    Eigen::Index horizon() const override { return shape_.horizon; }
    ChannelLayout layout() const override { return shape_.layout; }

    // Embeds world features and task id only; robot state is deliberately
    // excluded so it can be supplied fresh at every velocity evaluation.
    ConditioningCache encode_context(const Observation& obs, int round = 0, long tick = 0) const;

    const FeatureScalers& scalers() const { return scalers_; }
    void set_scalers(FeatureScalers scalers);
    const nn::Mlp& encoder() const { return encoder_; }
    const nn::Mlp& field() const { return field_; }
    nn::Mlp& encoder() { return encoder_; }
    nn::Mlp& field() { return field_; }

    double skip_gain() const { return skip_gain_; }
    static double time_gap(double tau) { return std::max(1.0 - tau, kMinGap); }

    std::size_t parameter_count() const {
        return encoder_.parameter_count() + field_.parameter_count();
    }

    Eigen::VectorXd encoder_input(const Observation& obs) const;
    Eigen::VectorXd normalized_state(const Eigen::VectorXd& robot_state) const;

    // Column layout of the velocity network input: [flat chunk | time | embedding | state].
    int field_input_size() const;
    static Eigen::VectorXd time_features(double tau);

protected:
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& noisy, double tau,
                             const ConditioningCache& cache,
                             const Eigen::VectorXd& robot_state) const override;

private:
    void check_networks() const;

    PolicyShape shape_;
    FeatureScalers scalers_;
    nn::Mlp encoder_;
    nn::Mlp field_;
    double skip_gain_ = 1.0;
};

struct DenoiseConfig {
    int num_steps = 10;
};

// Forward Euler from tau = 0 with step 1/N, velocity evaluated at tau_i = i/N.
ActionChunk denoise(const VelocityField& field, const ConditioningCache& cache,
                    const Eigen::VectorXd& robot_state, const DenoiseConfig& cfg, Rng& rng);
ActionChunk denoise_from(const VelocityField& field, const ConditioningCache& cache,
                         const Eigen::VectorXd& robot_state, const DenoiseConfig& cfg,
                         const ActionChunk& initial_noise);

ActionChunk sample_noise(Eigen::Index horizon, ChannelLayout layout, Rng& rng);

// --- training ---------------------------------------------------------------

/// One supervised pair: observation and its standardized H x D target chunk.
struct FlowSample {
    Observation obs;
    Eigen::MatrixXd target;
    Eigen::VectorXd mask;  // per step, 1 = real action, 0 = padding past episode end
};

struct FlowTrainConfig {
    int epochs = 150;
    int batch_size = 64;
    nn::AdamWParams optim{1e-3, 1e-4};
    double lr_floor_ratio = 0.05;
};

struct FlowPair {
    Eigen::MatrixXd noisy;            // tau * A + (1 - tau) * eps
    Eigen::MatrixXd target_velocity;  // A - eps
};

FlowPair flow_matching_pair(const Eigen::MatrixXd& target, const Eigen::MatrixXd& noise, double tau);

/// A fully materialised minibatch; columns are samples.
struct FlowBatch {
    Eigen::MatrixXd encoder_input;
    Eigen::MatrixXd noisy;
    Eigen::VectorXd tau;
    Eigen::MatrixXd state;
    Eigen::MatrixXd target_velocity;
    Eigen::MatrixXd weights;
};

FlowBatch make_flow_batch(const FlowPolicy& policy, std::span<const FlowSample> samples,
                          std::span<const std::size_t> indices, Rng& rng);

// Masked mean squared velocity error; fills gradients when non-null.
double flow_loss(const FlowPolicy& policy, const FlowBatch& batch, nn::Gradients* encoder_grad,
                 nn::Gradients* field_grad);

FeatureScalers fit_feature_scalers(std::span<const FlowSample> samples);

// Trains encoder and field jointly; returns the mean loss of every epoch.
std::vector<double> train_flow(FlowPolicy& policy, std::span<const FlowSample> samples,
                               const FlowTrainConfig& cfg, Rng& rng);

}  // namespace specflow
