#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "specflow/rng.hpp"

namespace specflow::nn {

/// Fully connected network: tanh on hidden layers, identity on the output.
/// Batches are stored column-wise (one sample per column).
struct Mlp {
    std::vector<int> layer_sizes;
    std::vector<Eigen::MatrixXd> weights;  // weights[l] is sizes[l+1] x sizes[l]
    std::vector<Eigen::VectorXd> biases;

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }

    std::size_t parameter_count() const;
    // Multiply-adds counted as two operations.
    std::uint64_t forward_flops() const;
    bool all_finite() const;
};

Mlp make_mlp(const std::vector<int>& layer_sizes, Rng& rng);
Mlp make_zero_mlp(const std::vector<int>& layer_sizes);

/// Activations recorded by forward(); activations[0] is the input batch.
struct Tape {
    std::vector<Eigen::MatrixXd> activations;
};

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static Gradients zeros_like(const Mlp& net);
    void add(const Gradients& other);
    void scale(double factor);
};

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input, Tape* tape = nullptr);
Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input);

// Reverse pass for the loss whose gradient w.r.t. the output batch is
// `output_gradient`. When `input_gradient` is non-null it receives dL/dinput.
Gradients backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& output_gradient,
                   Eigen::MatrixXd* input_gradient = nullptr);

// Flat parameter views, used by gradient checks and checkpoints. Order: for
// each layer, weights (column-major) then biases.
Eigen::VectorXd flatten_parameters(const Mlp& net);
void assign_parameters(Mlp& net, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_gradients(const Gradients& grads);

struct AdamWParams {
    double learning_rate = 2e-3;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators shaped like one network's parameters.
class AdamW {
public:
    AdamW(const Mlp& net, AdamWParams params);

    // Decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
    // `lr_scale` multiplies the base learning rate (schedules).
    void step(Mlp& net, const Gradients& grads, double lr_scale = 1.0);

    std::uint64_t step_count() const { return step_; }
    const AdamWParams& params() const { return params_; }

private:
    AdamWParams params_;
    std::vector<Eigen::MatrixXd> m_w_, v_w_;
    std::vector<Eigen::VectorXd> m_b_, v_b_;
    std::uint64_t step_ = 0;
};

// Cosine decay from 1 to `floor_ratio` over `total` steps.
double cosine_schedule(std::uint64_t step, std::uint64_t total, double floor_ratio);

}  // namespace specflow::nn
