#include "specflow/nn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace specflow::nn {

namespace {

void check_sizes(const std::vector<int>& layer_sizes) {
    if (layer_sizes.size() < 2) {
        throw std::invalid_argument("mlp: need at least input and output sizes");
    }
    for (int s : layer_sizes) {
        if (s <= 0) throw std::invalid_argument("mlp: layer widths must be positive");
    }
}

void check_shapes(const Mlp& net, const Gradients& grads) {
    if (grads.weights.size() != net.weights.size() || grads.biases.size() != net.biases.size()) {
        throw std::invalid_argument("gradient/network layer count mismatch");
    }
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        if (grads.weights[l].rows() != net.weights[l].rows() ||
            grads.weights[l].cols() != net.weights[l].cols() ||
            grads.biases[l].size() != net.biases[l].size()) {
            throw std::invalid_argument("gradient/network shape mismatch at layer " +
                                        std::to_string(l));
        }
    }
}

}  // namespace

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

std::uint64_t Mlp::forward_flops() const {
    std::uint64_t flops = 0;
    for (const auto& w : weights) {
        flops += 2ULL * static_cast<std::uint64_t>(w.rows()) * static_cast<std::uint64_t>(w.cols());
    }
    return flops;
}

bool Mlp::all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
}

Mlp make_mlp(const std::vector<int>& layer_sizes, Rng& rng) {
    Mlp net = make_zero_mlp(layer_sizes);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        // Xavier-normal; the output layer starts smaller so untrained heads are near zero.
        const double fan = static_cast<double>(layer_sizes[l] + layer_sizes[l + 1]);
        double scale = std::sqrt(2.0 / fan);
        if (l + 1 == net.weights.size()) scale *= 0.5;
        net.weights[l] = gaussian_matrix(layer_sizes[l + 1], layer_sizes[l], rng) * scale;
    }
    return net;
}

Mlp make_zero_mlp(const std::vector<int>& layer_sizes) {
    check_sizes(layer_sizes);
    Mlp net;
    net.layer_sizes = layer_sizes;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        net.weights.emplace_back(Eigen::MatrixXd::Zero(layer_sizes[l + 1], layer_sizes[l]));
        net.biases.emplace_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
    }
    return net;
}

Gradients Gradients::zeros_like(const Mlp& net) {
    Gradients g;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
}

void Gradients::add(const Gradients& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += other.weights[l];
        biases[l] += other.biases[l];
    }
}

void Gradients::scale(double factor) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] *= factor;
        biases[l] *= factor;
    }
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input, Tape* tape) {
    if (input.rows() != net.input_size()) {
        throw std::invalid_argument("mlp forward: input has " + std::to_string(input.rows()) +
                                    " rows, expected " + std::to_string(net.input_size()));
    }
    if (tape) {
        tape->activations.clear();
        tape->activations.reserve(net.layer_count() + 1);
        tape->activations.push_back(input);
    }
    Eigen::MatrixXd x = input;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Eigen::MatrixXd z = net.weights[l] * x;
        z.colwise() += net.biases[l];
        if (l + 1 < net.layer_count()) {
            z = z.array().tanh().matrix();
        }
        if (tape) tape->activations.push_back(z);
        x = std::move(z);
    }
    if (!x.allFinite()) {
        throw std::runtime_error("mlp forward: non-finite output (NaN propagation)");
    }
    return x;
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input) {
    Eigen::MatrixXd out = forward(net, Eigen::MatrixXd(input), nullptr);
    return out.col(0);
}

Gradients backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& output_gradient,
                   Eigen::MatrixXd* input_gradient) {
    if (tape.activations.size() != net.layer_count() + 1) {
        throw std::invalid_argument("mlp backward: tape does not match network depth");
    }
    const auto& out = tape.activations.back();
    if (output_gradient.rows() != out.rows() || output_gradient.cols() != out.cols()) {
        throw std::invalid_argument("mlp backward: output gradient shape mismatch");
    }
    for (std::size_t l = 0; l <= net.layer_count(); ++l) {
        if (tape.activations[l].rows() != net.layer_sizes[l]) {
            throw std::invalid_argument("mlp backward: tape/net width mismatch");
        }
    }

    Gradients grads = Gradients::zeros_like(net);
    Eigen::MatrixXd delta = output_gradient;  // dL/dz for the current layer
    for (std::size_t l = net.layer_count(); l-- > 0;) {
        const Eigen::MatrixXd& below = tape.activations[l];
        grads.weights[l].noalias() = delta * below.transpose();
        grads.biases[l] = delta.rowwise().sum();
        Eigen::MatrixXd upstream = net.weights[l].transpose() * delta;
        if (l > 0) {
            // below = tanh(z_below), so dtanh = 1 - below^2.
            delta = upstream.array() * (1.0 - below.array().square());
        } else if (input_gradient) {
            *input_gradient = std::move(upstream);
        }
    }
    return grads;
}

Eigen::VectorXd flatten_parameters(const Mlp& net) {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(net.parameter_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        flat.segment(k, net.weights[l].size()) = net.weights[l].reshaped();
        k += net.weights[l].size();
        flat.segment(k, net.biases[l].size()) = net.biases[l];
        k += net.biases[l].size();
    }
    return flat;
}

void assign_parameters(Mlp& net, const Eigen::VectorXd& flat) {
    if (flat.size() != static_cast<Eigen::Index>(net.parameter_count())) {
        throw std::invalid_argument("assign_parameters: size mismatch");
    }
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto& w = net.weights[l];
        w.reshaped() = flat.segment(k, w.size());
        k += w.size();
        net.biases[l] = flat.segment(k, net.biases[l].size());
        k += net.biases[l].size();
    }
}

Eigen::VectorXd flatten_gradients(const Gradients& grads) {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        n += grads.weights[l].size() + grads.biases[l].size();
    }
    Eigen::VectorXd flat(n);
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        flat.segment(k, grads.weights[l].size()) = grads.weights[l].reshaped();
        k += grads.weights[l].size();
        flat.segment(k, grads.biases[l].size()) = grads.biases[l];
        k += grads.biases[l].size();
    }
    return flat;
}

AdamW::AdamW(const Mlp& net, AdamWParams params) : params_(params) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        m_w_.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        v_w_.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        m_b_.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        v_b_.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
}

void AdamW::step(Mlp& net, const Gradients& grads, double lr_scale) {
    check_shapes(net, grads);
    if (m_w_.size() != net.layer_count()) {
        throw std::invalid_argument("adamw: optimizer state does not match network");
    }
    ++step_;
    const double lr = params_.learning_rate * lr_scale;
    const double bc1 = 1.0 - std::pow(params_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(params_.beta2, static_cast<double>(step_));
    const double b1 = params_.beta1;
    const double b2 = params_.beta2;
    const double eps = params_.epsilon;
    const double wd = params_.weight_decay;

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
        auto m_hat = (m / bc1).array();
        auto v_hat = (v / bc2).array();
        param.array() -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * param.array());
    };
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        update(net.weights[l], grads.weights[l], m_w_[l], v_w_[l]);
        update(net.biases[l], grads.biases[l], m_b_[l], v_b_[l]);
    }
}

double cosine_schedule(std::uint64_t step, std::uint64_t total, double floor_ratio) {
    if (total == 0) return 1.0;
    const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
    return floor_ratio + (1.0 - floor_ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace specflow::nn
