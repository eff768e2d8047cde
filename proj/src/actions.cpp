#include "specflow/actions.hpp"

#include <cmath>
#include <stdexcept>

namespace specflow {

void ChannelLayout::validate() const {
    if (pos_dims < 0 || rot_dims < 0) {
        throw std::invalid_argument("channel layout: negative channel count");
    }
    if (dims() < 2) {
        throw std::invalid_argument("channel layout: need at least one continuous channel");
    }
}

std::string to_string(ActionSpace space) {
    return space == ActionSpace::raw ? "raw" : "standardized";
}

std::string to_string(DistanceMetric metric) {
    return metric == DistanceMetric::l2 ? "l2" : "linf";
}

DistanceMetric parse_metric(const std::string& name) {
    if (name == "l2") return DistanceMetric::l2;
    if (name == "linf") return DistanceMetric::linf;
    throw std::invalid_argument("unknown distance metric '" + name + "'");
}

ActionChunk::ActionChunk(Eigen::MatrixXd values, ChannelLayout layout, ActionSpace space)
    : values_(std::move(values)), layout_(layout), space_(space) {
    layout_.validate();
    if (values_.rows() <= 0) {
        throw std::invalid_argument("action chunk: horizon must be positive");
    }
    if (values_.cols() != layout_.dims()) {
        throw std::invalid_argument("action chunk: column count " + std::to_string(values_.cols()) +
                                    " does not match layout width " +
                                    std::to_string(layout_.dims()));
    }
    if (!values_.allFinite()) {
        throw std::invalid_argument("action chunk: non-finite entry");
    }
}

ActionChunk ActionChunk::zeros(Eigen::Index horizon, ChannelLayout layout, ActionSpace space) {
    return ActionChunk(Eigen::MatrixXd::Zero(horizon, layout.dims()), layout, space);
}

Eigen::VectorXd ActionChunk::flatten() const {
    Eigen::VectorXd flat(values_.size());
    Eigen::Index k = 0;
    for (Eigen::Index h = 0; h < values_.rows(); ++h) {
        for (Eigen::Index d = 0; d < values_.cols(); ++d) {
            flat(k++) = values_(h, d);
        }
    }
    return flat;
}

ActionChunk ActionChunk::unflatten(const Eigen::VectorXd& flat, Eigen::Index horizon,
                                   ChannelLayout layout, ActionSpace space) {
    if (flat.size() != horizon * layout.dims()) {
        throw std::invalid_argument("action chunk: flat size does not match H*D");
    }
    Eigen::MatrixXd values(horizon, layout.dims());
    Eigen::Index k = 0;
    for (Eigen::Index h = 0; h < horizon; ++h) {
        for (Eigen::Index d = 0; d < layout.dims(); ++d) {
            values(h, d) = flat(k++);
        }
    }
    return ActionChunk(std::move(values), layout, space);
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd std)
    : mean_(std::move(mean)), std_(std::move(std)) {
    if (mean_.size() != std_.size()) {
        throw std::invalid_argument("standardizer: mean/std size mismatch");
    }
    for (Eigen::Index i = 0; i < std_.size(); ++i) {
        if (!(std_(i) > 0.0) || !std::isfinite(std_(i)) || !std::isfinite(mean_(i))) {
            throw std::invalid_argument("standardizer: std entries must be positive and finite");
        }
    }
}

Standardizer Standardizer::identity(Eigen::Index dims) {
    return Standardizer(Eigen::VectorXd::Zero(dims), Eigen::VectorXd::Ones(dims));
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& samples) {
    return fit(samples, Eigen::VectorXd::Ones(samples.rows()));
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& samples, const Eigen::VectorXd& row_weights) {
    if (row_weights.size() != samples.rows()) {
        throw std::invalid_argument("standardizer: weight count does not match rows");
    }
    const double total = row_weights.sum();
    if (!(total > 0.0)) {
        throw std::invalid_argument("standardizer: no samples to fit");
    }
    Eigen::VectorXd mean = (samples.transpose() * row_weights) / total;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(samples.cols());
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        if (row_weights(r) == 0.0) continue;
        const Eigen::VectorXd diff = samples.row(r).transpose() - mean;
        var += row_weights(r) * diff.cwiseProduct(diff);
    }
    var /= total;
    Eigen::VectorXd std = var.cwiseSqrt().cwiseMax(kMinStd);
    return Standardizer(std::move(mean), std::move(std));
}

Eigen::VectorXd Standardizer::transform(const Eigen::VectorXd& x) const {
    if (x.size() != mean_.size()) {
        throw std::invalid_argument("standardizer: dimension mismatch");
    }
    return (x - mean_).cwiseQuotient(std_);
}

Eigen::VectorXd Standardizer::inverse(const Eigen::VectorXd& z) const {
    if (z.size() != mean_.size()) {
        throw std::invalid_argument("standardizer: dimension mismatch");
    }
    return z.cwiseProduct(std_) + mean_;
}

double Standardizer::transform_channel(Eigen::Index channel, double x) const {
    return (x - mean_(channel)) / std_(channel);
}

ActionChunk standardize(const ActionChunk& chunk, const Standardizer& s) {
    if (chunk.space() != ActionSpace::raw) {
        throw std::invalid_argument("standardize: chunk is already standardized");
    }
    if (s.dims() != chunk.layout().dims()) {
        throw std::invalid_argument("standardize: dimension mismatch");
    }
    Eigen::MatrixXd out = (chunk.values().rowwise() - s.mean().transpose()).array().rowwise() /
                          s.std().transpose().array();
    return ActionChunk(std::move(out), chunk.layout(), ActionSpace::standardized);
}

ActionChunk destandardize(const ActionChunk& chunk, const Standardizer& s) {
    if (chunk.space() != ActionSpace::standardized) {
        throw std::invalid_argument("destandardize: chunk is not standardized");
    }
    if (s.dims() != chunk.layout().dims()) {
        throw std::invalid_argument("destandardize: dimension mismatch");
    }
    Eigen::MatrixXd out = (chunk.values().array().rowwise() * s.std().transpose().array()).matrix();
    out.rowwise() += s.mean().transpose();
    return ActionChunk(std::move(out), chunk.layout(), ActionSpace::raw);
}

double continuous_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                           const Eigen::Ref<const Eigen::RowVectorXd>& b,
                           const ChannelLayout& layout, DistanceMetric metric) {
    if (a.size() != layout.dims() || b.size() != layout.dims()) {
        throw std::invalid_argument("continuous_distance: layout mismatch");
    }
    const auto n = layout.continuous_dims();
    const auto diff = a.head(n) - b.head(n);
    return metric == DistanceMetric::l2 ? diff.norm() : diff.cwiseAbs().maxCoeff();
}

double continuous_distance(const ActionChunk& a, const ActionChunk& b, Eigen::Index step,
                           DistanceMetric metric) {
    if (a.space() != ActionSpace::standardized || b.space() != ActionSpace::standardized) {
        throw std::invalid_argument("continuous_distance: inputs must be standardized");
    }
    if (!(a.layout() == b.layout())) {
        throw std::invalid_argument("continuous_distance: layout mismatch");
    }
    return continuous_distance(a.values().row(step), b.values().row(step), a.layout(), metric);
}

}  // namespace specflow
