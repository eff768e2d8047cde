#include "specflow/flow_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace specflow {

void PolicyShape::validate() const {
    layout.validate();
    if (horizon <= 0 || world_dims <= 0 || state_dims <= 0 || num_tasks <= 0 ||
        embedding_dims <= 0) {
        throw std::invalid_argument("policy shape: all dimensions must be positive");
    }
}

Eigen::VectorXd one_hot(int index, int count) {
    if (index < 0 || index >= count) {
        throw std::invalid_argument("unknown task id " + std::to_string(index));
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(count);
    v(index) = 1.0;
    return v;
}

ActionChunk VelocityField::velocity(const ActionChunk& noisy, double tau,
                                    const ConditioningCache& cache,
                                    const Eigen::VectorXd& robot_state) const {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("velocity: tau out of [0, 1]");
    }
    if (noisy.space() != ActionSpace::standardized) {
        throw std::invalid_argument("velocity: noisy chunk must be standardized");
    }
    if (noisy.horizon() != horizon() || !(noisy.layout() == layout())) {
        throw std::invalid_argument("velocity: chunk shape mismatch");
    }
    Eigen::MatrixXd v = evaluate(noisy.values(), tau, cache, robot_state);
    return ActionChunk(std::move(v), layout(), ActionSpace::standardized);
}

FlowPolicy::FlowPolicy(PolicyShape shape, const Architecture& arch, Rng& rng)
    : shape_(shape),
      scalers_{Standardizer::identity(shape.world_dims), Standardizer::identity(shape.state_dims)} {
    shape_.validate();
    std::vector<int> enc{shape_.world_dims + shape_.num_tasks};
    enc.insert(enc.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
    enc.push_back(shape_.embedding_dims);
    encoder_ = nn::make_mlp(enc, rng);

    std::vector<int> fld{field_input_size()};
    fld.insert(fld.end(), arch.field_hidden.begin(), arch.field_hidden.end());
    fld.push_back(shape_.chunk_size());
    field_ = nn::make_mlp(fld, rng);
}

FlowPolicy::FlowPolicy(PolicyShape shape, FeatureScalers scalers, nn::Mlp encoder, nn::Mlp field,
                       double skip_gain)
    : shape_(shape), scalers_(std::move(scalers)), encoder_(std::move(encoder)),
      field_(std::move(field)), skip_gain_(skip_gain) {
    shape_.validate();
    if (!std::isfinite(skip_gain_)) throw std::invalid_argument("flow policy: non-finite skip gain");
    check_networks();
}

void FlowPolicy::check_networks() const {
    if (encoder_.input_size() != shape_.world_dims + shape_.num_tasks ||
        encoder_.output_size() != shape_.embedding_dims) {
        throw std::invalid_argument("flow policy: encoder dimensions do not match shape");
    }
    if (field_.input_size() != field_input_size() || field_.output_size() != shape_.chunk_size()) {
        throw std::invalid_argument("flow policy: velocity field dimensions do not match shape");
    }
    if (scalers_.world.dims() != shape_.world_dims || scalers_.state.dims() != shape_.state_dims) {
        throw std::invalid_argument("flow policy: feature scaler dimensions do not match shape");
    }
}

void FlowPolicy::set_scalers(FeatureScalers scalers) {
    scalers_ = std::move(scalers);
    check_networks();
}

int FlowPolicy::field_input_size() const {
    return shape_.chunk_size() + kTimeFeatures + shape_.embedding_dims + shape_.state_dims;
}

Eigen::VectorXd FlowPolicy::time_features(double tau) {
    using std::numbers::pi;
    Eigen::VectorXd t(kTimeFeatures);
    t << tau, std::sin(pi * tau), std::cos(pi * tau), std::sin(2 * pi * tau), std::cos(2 * pi * tau);
    return t;
}

Eigen::VectorXd FlowPolicy::encoder_input(const Observation& obs) const {
    if (obs.world_features.size() != shape_.world_dims) {
        throw std::invalid_argument("observation: world feature size mismatch");
    }
    if (!obs.world_features.allFinite()) {
        throw std::invalid_argument("observation: non-finite world features");
    }
    Eigen::VectorXd in(shape_.world_dims + shape_.num_tasks);
    in << scalers_.world.transform(obs.world_features), one_hot(obs.task_id, shape_.num_tasks);
    return in;
}

Eigen::VectorXd FlowPolicy::normalized_state(const Eigen::VectorXd& robot_state) const {
    if (robot_state.size() != shape_.state_dims || !robot_state.allFinite()) {
        throw std::invalid_argument("robot state: wrong size or non-finite");
    }
    return scalers_.state.transform(robot_state);
}

ConditioningCache FlowPolicy::encode_context(const Observation& obs, int round, long tick) const {
    ConditioningCache cache;
    cache.embedding = nn::forward(encoder_, encoder_input(obs));
    cache.captured_round = round;
    cache.captured_tick = tick;
    return cache;
}

Eigen::MatrixXd FlowPolicy::evaluate(const Eigen::MatrixXd& noisy, double tau,
                                     const ConditioningCache& cache,
                                     const Eigen::VectorXd& robot_state) const {
    if (cache.embedding.size() != shape_.embedding_dims) {
        throw std::invalid_argument("velocity: cache embedding size mismatch");
    }
    const ActionChunk as_chunk(noisy, shape_.layout, ActionSpace::standardized);
    Eigen::VectorXd in(field_input_size());
    const Eigen::VectorXd flat = as_chunk.flatten();
    in << flat, time_features(tau), cache.embedding, normalized_state(robot_state);
    const Eigen::VectorXd out = (nn::forward(field_, in) - skip_gain_ * flat) / time_gap(tau);
    return ActionChunk::unflatten(out, shape_.horizon, shape_.layout, ActionSpace::standardized)
        .values();
}

ActionChunk sample_noise(Eigen::Index horizon, ChannelLayout layout, Rng& rng) {
    return ActionChunk(gaussian_matrix(horizon, layout.dims(), rng), layout,
                       ActionSpace::standardized);
}

ActionChunk denoise(const VelocityField& field, const ConditioningCache& cache,
                    const Eigen::VectorXd& robot_state, const DenoiseConfig& cfg, Rng& rng) {
    const ActionChunk noise = sample_noise(field.horizon(), field.layout(), rng);
    return denoise_from(field, cache, robot_state, cfg, noise);
}

ActionChunk denoise_from(const VelocityField& field, const ConditioningCache& cache,
                         const Eigen::VectorXd& robot_state, const DenoiseConfig& cfg,
                         const ActionChunk& initial_noise) {
    if (cfg.num_steps < 1) {
        throw std::invalid_argument("denoise: need at least one step");
    }
    const double dt = 1.0 / cfg.num_steps;
    Eigen::MatrixXd state = initial_noise.values();
    for (int i = 0; i < cfg.num_steps; ++i) {
        const double tau = static_cast<double>(i) / cfg.num_steps;
        const ActionChunk current(state, field.layout(), ActionSpace::standardized);
        state += dt * field.velocity(current, tau, cache, robot_state).values();
        if (!state.allFinite()) {
            throw std::runtime_error("denoise: non-finite state after step " + std::to_string(i + 1) +
                                     " of " + std::to_string(cfg.num_steps));
        }
    }
    return ActionChunk(std::move(state), field.layout(), ActionSpace::standardized);
}

FlowPair flow_matching_pair(const Eigen::MatrixXd& target, const Eigen::MatrixXd& noise, double tau) {
    return {tau * target + (1.0 - tau) * noise, target - noise};
}

FlowBatch make_flow_batch(const FlowPolicy& policy, std::span<const FlowSample> samples,
                          std::span<const std::size_t> indices, Rng& rng) {
    const auto& shape = policy.shape();
    const auto b = static_cast<Eigen::Index>(indices.size());
    const int chunk = shape.chunk_size();
    const int dims = shape.layout.dims();
    FlowBatch batch;
    batch.encoder_input.resize(shape.world_dims + shape.num_tasks, b);
    batch.noisy.resize(chunk, b);
    batch.tau.resize(b);
    batch.state.resize(shape.state_dims, b);
    batch.target_velocity.resize(chunk, b);
    batch.weights.resize(chunk, b);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index c = 0; c < b; ++c) {
        const FlowSample& s = samples[indices[static_cast<std::size_t>(c)]];
        const double tau = unit(rng);
        const Eigen::MatrixXd eps = gaussian_matrix(shape.horizon, dims, rng);
        const FlowPair pair = flow_matching_pair(s.target, eps, tau);
        batch.tau(c) = tau;
        batch.encoder_input.col(c) = policy.encoder_input(s.obs);
        batch.state.col(c) = policy.normalized_state(s.obs.robot_state);
        for (int h = 0; h < shape.horizon; ++h) {
            for (int d = 0; d < dims; ++d) {
                const Eigen::Index k = h * dims + d;
                batch.noisy(k, c) = pair.noisy(h, d);
                batch.target_velocity(k, c) = pair.target_velocity(h, d);
                batch.weights(k, c) = s.mask(h);
            }
        }
    }
    return batch;
}

double flow_loss(const FlowPolicy& policy, const FlowBatch& batch, nn::Gradients* encoder_grad,
                 nn::Gradients* field_grad) {
    const auto& shape = policy.shape();
    const Eigen::Index b = batch.noisy.cols();
    const int chunk = shape.chunk_size();

    nn::Tape enc_tape;
    const Eigen::MatrixXd embedding = nn::forward(policy.encoder(), batch.encoder_input, &enc_tape);

    Eigen::MatrixXd field_in(policy.field_input_size(), b);
    for (Eigen::Index c = 0; c < b; ++c) {
        field_in.col(c) << batch.noisy.col(c), FlowPolicy::time_features(batch.tau(c)),
            embedding.col(c), batch.state.col(c);
    }
    nn::Tape field_tape;
    const Eigen::MatrixXd endpoint = nn::forward(policy.field(), field_in, &field_tape);
    Eigen::VectorXd inv_gap(b);
    for (Eigen::Index c = 0; c < b; ++c) inv_gap(c) = 1.0 / FlowPolicy::time_gap(batch.tau(c));
    const Eigen::MatrixXd out =
        (endpoint - policy.skip_gain() * batch.noisy) * inv_gap.asDiagonal();

    const Eigen::MatrixXd resid = out - batch.target_velocity;
    const double norm = static_cast<double>(b) * chunk;
    const double loss = (batch.weights.array() * resid.array().square()).sum() / norm;
    if (!std::isfinite(loss)) {
        throw std::runtime_error("flow loss is not finite");
    }
    if (encoder_grad || field_grad) {
        const Eigen::MatrixXd dout =
            (2.0 / norm) * (batch.weights.array() * resid.array()).matrix() * inv_gap.asDiagonal();
        Eigen::MatrixXd din;
        nn::Gradients fg = nn::backward(policy.field(), field_tape, dout, &din);
        if (encoder_grad) {
            const Eigen::MatrixXd demb =
                din.middleRows(chunk + FlowPolicy::kTimeFeatures, shape.embedding_dims);
            *encoder_grad = nn::backward(policy.encoder(), enc_tape, demb);
        }
        if (field_grad) *field_grad = std::move(fg);
    }
    return loss;
}

FeatureScalers fit_feature_scalers(std::span<const FlowSample> samples) {
    if (samples.empty()) {
        throw std::invalid_argument("fit_feature_scalers: empty dataset");
    }
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd world(n, samples[0].obs.world_features.size());
    Eigen::MatrixXd state(n, samples[0].obs.robot_state.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        world.row(i) = samples[static_cast<std::size_t>(i)].obs.world_features.transpose();
        state.row(i) = samples[static_cast<std::size_t>(i)].obs.robot_state.transpose();
    }
    return {Standardizer::fit(world), Standardizer::fit(state)};
}

std::vector<double> train_flow(FlowPolicy& policy, std::span<const FlowSample> samples,
                               const FlowTrainConfig& cfg, Rng& rng) {
    if (samples.empty()) {
        throw std::invalid_argument("train_flow: empty dataset");
    }
    if (cfg.epochs < 1 || cfg.batch_size < 1) {
        throw std::invalid_argument("train_flow: epochs and batch size must be positive");
    }
    nn::AdamW enc_opt(policy.encoder(), cfg.optim);
    nn::AdamW field_opt(policy.field(), cfg.optim);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batches_per_epoch =
        (samples.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
        static_cast<std::size_t>(cfg.batch_size);
    const std::uint64_t total_steps = batches_per_epoch * static_cast<std::uint64_t>(cfg.epochs);

    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const FlowBatch batch = make_flow_batch(policy, samples, idx, rng);
            nn::Gradients g_enc, g_field;
            const double loss = flow_loss(policy, batch, &g_enc, &g_field);
            const double scale = nn::cosine_schedule(enc_opt.step_count(), total_steps, cfg.lr_floor_ratio);
            enc_opt.step(policy.encoder(), g_enc, scale);
            field_opt.step(policy.field(), g_field, scale);
            sum += loss * static_cast<double>(end - start);
        }
        const double mean = sum / static_cast<double>(samples.size());
        if (!std::isfinite(mean)) {
            throw std::runtime_error("train_flow: NaN loss at epoch " + std::to_string(epoch));
        }
        curve.push_back(mean);
    }
    return curve;
}

}  // namespace specflow
