#include "specflow/draft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace specflow {

DraftModel::DraftModel(PolicyShape shape, FeatureScalers scalers, const std::vector<int>& hidden,
                       Rng& rng)
    : shape_(shape), scalers_(std::move(scalers)) {
    shape_.validate();
    std::vector<int> sizes{shape_.world_dims + shape_.num_tasks + shape_.state_dims};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(shape_.chunk_size());
    net_ = nn::make_mlp(sizes, rng);
}

DraftModel::DraftModel(PolicyShape shape, FeatureScalers scalers, nn::Mlp net)
    : shape_(shape), scalers_(std::move(scalers)), net_(std::move(net)) {
    shape_.validate();
    if (net_.input_size() != shape_.world_dims + shape_.num_tasks + shape_.state_dims ||
        net_.output_size() != shape_.chunk_size()) {
        throw std::invalid_argument("draft model: network dimensions do not match shape");
    }
}

Eigen::VectorXd DraftModel::input(const Observation& obs) const {
    if (obs.world_features.size() != shape_.world_dims ||
        obs.robot_state.size() != shape_.state_dims) {
        throw std::invalid_argument("draft model: observation shape mismatch");
    }
    Eigen::VectorXd in(net_.input_size());
    in << scalers_.world.transform(obs.world_features), one_hot(obs.task_id, shape_.num_tasks),
        scalers_.state.transform(obs.robot_state);
    return in;
}

ActionChunk DraftModel::propose(const Observation& obs) const {
    const Eigen::VectorXd out = nn::forward(net_, input(obs));
    return ActionChunk::unflatten(out, shape_.horizon, shape_.layout, ActionSpace::standardized);
}

void check_draft_budget(const DraftModel& draft, const FlowPolicy& main, int denoise_steps) {
    if (denoise_steps < 1) throw std::invalid_argument("check_draft_budget: denoise steps must be >= 1");
    const auto draft_params = static_cast<double>(draft.net().parameter_count());
    const auto main_params = static_cast<double>(main.parameter_count());
    if (!(draft_params < 0.5 * main_params)) {
        throw std::invalid_argument("draft model too large: " + std::to_string(draft.net().parameter_count()) +
                                    " parameters vs " + std::to_string(main.parameter_count()) + " in the main policy");
    }
    const std::uint64_t denoise_flops =
        main.encoder().forward_flops() + static_cast<std::uint64_t>(denoise_steps) * main.field().forward_flops();
    if (!(5 * draft.net().forward_flops() < denoise_flops)) {
        throw std::invalid_argument("draft model too expensive: " + std::to_string(draft.net().forward_flops()) +
                                    " flops vs " + std::to_string(denoise_flops) + " per denoise");
    }
}

double smooth_l1(double x, double y, double beta) {
    const double d = std::abs(x - y);
    return d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
}

double smooth_l1_grad(double x, double y, double beta) {
    const double d = x - y;
    if (std::abs(d) < beta) return d / beta;
    return d > 0 ? 1.0 : -1.0;
}

Eigen::VectorXd prefix_weights(int prefix, int horizon, double gamma, double tail_weight) {
    if (horizon < 1 || prefix < 1 || prefix > horizon) {
        throw std::invalid_argument("prefix_weights: need 1 <= P <= H");
    }
    Eigen::VectorXd w(horizon);
    double ramp = 1.0;
    for (int h = 0; h < horizon; ++h) {
        if (h < prefix) {
            w(h) = ramp;
            ramp *= gamma;
        } else {
            w(h) = tail_weight;
        }
    }
    return w;
}

std::string to_string(TargetSource source) {
    return source == TargetSource::teacher ? "teacher" : "demo";
}

TargetSource parse_target_source(const std::string& name) {
    if (name == "teacher") return TargetSource::teacher;
    if (name == "demo") return TargetSource::demo;
    throw std::invalid_argument("unknown draft target source '" + name + "'");
}

void DraftTrainConfig::validate(int horizon) const {
    if (!(gamma_prefix > 0.0 && gamma_prefix <= 1.0)) {
        throw std::invalid_argument("draft config: gamma_prefix must be in (0, 1]");
    }
    if (!(tail_weight >= 0.0 && tail_weight <= 1.0)) {
        throw std::invalid_argument("draft config: tail_weight must be in [0, 1]");
    }
    if (max_prefix < 1 || max_prefix > horizon) {
        throw std::invalid_argument("draft config: max_prefix must be in [1, H]");
    }
    if (!(beta > 0.0) || epochs < 1 || batch_size < 1 || select_steps < 1) {
        throw std::invalid_argument("draft config: beta, epochs, batch size and select steps must be positive");
    }
}

double draft_loss(const Eigen::MatrixXd& output, const Eigen::MatrixXd& target,
                  const Eigen::MatrixXd& mask, const Eigen::VectorXd& step_weights, int dims,
                  double beta, Eigen::MatrixXd* output_grad) {
    const Eigen::Index b = output.cols();
    if (target.rows() != output.rows() || target.cols() != b || mask.cols() != b ||
        mask.rows() * dims != output.rows() || step_weights.size() != mask.rows()) {
        throw std::invalid_argument("draft_loss: shape mismatch");
    }
    if (output_grad) output_grad->setZero(output.rows(), b);
    double loss = 0.0;
    for (Eigen::Index c = 0; c < b; ++c) {
        for (Eigen::Index h = 0; h < mask.rows(); ++h) {
            const double w = step_weights(h) * mask(h, c) / dims;
            if (w == 0.0) continue;
            for (int d = 0; d < dims; ++d) {
                const Eigen::Index k = h * dims + d;
                loss += w * smooth_l1(output(k, c), target(k, c), beta);
                if (output_grad) {
                    (*output_grad)(k, c) = w * smooth_l1_grad(output(k, c), target(k, c), beta) / b;
                }
            }
        }
    }
    return loss / b;
}

std::vector<DraftSample> teacher_targets(const FlowPolicy& main, std::span<const FlowSample> data,
                                         const DenoiseConfig& denoise, std::uint64_t seed) {
    std::vector<DraftSample> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const FlowSample& s = data[i];
        Rng rng = make_stream(seed, Stream::teacher, i);
        const ConditioningCache cache = main.encode_context(s.obs);
        const ActionChunk chunk = specflow::denoise(main, cache, s.obs.robot_state, denoise, rng);
        out.push_back({s.obs, chunk.values(), s.mask});
    }
    return out;
}

std::vector<DraftSample> demo_targets(std::span<const FlowSample> data) {
    std::vector<DraftSample> out;
    out.reserve(data.size());
    for (const FlowSample& s : data) out.push_back({s.obs, s.target, s.mask});
    return out;
}

namespace {

struct DraftBatch {
    Eigen::MatrixXd input, target, mask;
};

DraftBatch make_batch(const DraftModel& model, std::span<const DraftSample> samples,
                      std::span<const std::size_t> idx) {
    const auto& shape = model.shape();
    const auto b = static_cast<Eigen::Index>(idx.size());
    DraftBatch batch;
    batch.input.resize(model.net().input_size(), b);
    batch.target.resize(shape.chunk_size(), b);
    batch.mask.resize(shape.horizon, b);
    for (Eigen::Index c = 0; c < b; ++c) {
        const DraftSample& s = samples[idx[static_cast<std::size_t>(c)]];
        batch.input.col(c) = model.input(s.obs);
        batch.target.col(c) =
            ActionChunk(s.target, shape.layout, ActionSpace::standardized).flatten();
        batch.mask.col(c) = s.mask;
    }
    return batch;
}

double rms_over(const DraftModel& model, std::span<const DraftSample> samples,
                std::span<const std::size_t> idx, int steps) {
    const int dims = model.shape().layout.dims();
    const int limit = std::min(steps, model.shape().horizon);
    double sq = 0.0;
    double count = 0.0;
    for (std::size_t i : idx) {
        const DraftSample& s = samples[i];
        const ActionChunk pred = model.propose(s.obs);
        for (int h = 0; h < limit; ++h) {
            if (s.mask(h) == 0.0) continue;
            for (int d = 0; d < dims; ++d) {
                const double e = pred.values()(h, d) - s.target(h, d);
                sq += e * e;
                count += 1.0;
            }
        }
    }
    return count > 0.0 ? std::sqrt(sq / count) : 0.0;
}

}  // namespace

double chunk_rms(const DraftModel& model, std::span<const DraftSample> samples, int steps) {
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    return rms_over(model, samples, idx, steps);
}

DraftTrainResult train_draft(DraftModel& model, std::span<const DraftSample> samples,
                             const DraftTrainConfig& cfg, Rng& rng) {
    const auto& shape = model.shape();
    cfg.validate(shape.horizon);
    if (samples.empty()) {
        throw std::invalid_argument("train_draft: empty dataset");
    }

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(
        std::floor(cfg.validation_fraction * static_cast<double>(samples.size())));
    std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
    if (val_idx.empty()) val_idx = train_idx;  // degenerate datasets validate on themselves

    nn::AdamW opt(model.net(), cfg.optim);
    std::uniform_int_distribution<int> prefix_dist(1, cfg.max_prefix);
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    const std::uint64_t total_steps =
        ((train_idx.size() + bs - 1) / bs) * static_cast<std::uint64_t>(cfg.epochs);

    DraftTrainResult result;
    nn::Mlp best = model.net();
    result.best_validation_rms = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double sum = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += bs) {
            const std::size_t end = std::min(train_idx.size(), start + bs);
            const std::span<const std::size_t> idx(train_idx.data() + start, end - start);
            const DraftBatch batch = make_batch(model, samples, idx);
            const int prefix = prefix_dist(rng);
            const Eigen::VectorXd w =
                prefix_weights(prefix, shape.horizon, cfg.gamma_prefix, cfg.tail_weight);

            nn::Tape tape;
            const Eigen::MatrixXd out = nn::forward(model.net(), batch.input, &tape);
            Eigen::MatrixXd dout;
            const double loss = draft_loss(out, batch.target, batch.mask, w, shape.layout.dims(),
                                           cfg.beta, &dout);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("train_draft: NaN loss at epoch " + std::to_string(epoch));
            }
            const nn::Gradients g = nn::backward(model.net(), tape, dout);
            opt.step(model.net(), g, nn::cosine_schedule(opt.step_count(), total_steps, cfg.lr_floor_ratio));
            sum += loss * static_cast<double>(end - start);
        }
        result.train_loss.push_back(sum / static_cast<double>(train_idx.size()));
        const double rms = rms_over(model, samples, val_idx, cfg.select_steps);
        result.validation_rms.push_back(rms);
        if (rms < result.best_validation_rms) {
            result.best_validation_rms = rms;
            result.best_epoch = epoch;
            best = model.net();
        }
    }
    model.net() = std::move(best);
    return result;
}

}  // namespace specflow
