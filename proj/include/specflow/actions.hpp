#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace specflow {

// Per-step action channels: [position deltas | rotation deltas | gripper].
struct ChannelLayout {
    int pos_dims = 2;
    int rot_dims = 0;

    int continuous_dims() const { return pos_dims + rot_dims; }
    int dims() const { return continuous_dims() + 1; }
    int gripper_index() const { return continuous_dims(); }

    // Throws std::invalid_argument unless D >= 2 and counts are non-negative.
    void validate() const;

    bool operator==(const ChannelLayout&) const = default;
};

enum class ActionSpace { raw, standardized };

enum class DistanceMetric { l2, linf };

std::string to_string(ActionSpace space);
std::string to_string(DistanceMetric metric);
DistanceMetric parse_metric(const std::string& name);

/// An H x D matrix of per-step actions tagged with the space it lives in.
/// Immutable after construction; all entries are checked to be finite.
class ActionChunk {
public:
    ActionChunk(Eigen::MatrixXd values, ChannelLayout layout, ActionSpace space);

    static ActionChunk zeros(Eigen::Index horizon, ChannelLayout layout, ActionSpace space);

    Eigen::Index horizon() const { return values_.rows(); }
    const Eigen::MatrixXd& values() const { return values_; }
    const ChannelLayout& layout() const { return layout_; }
    ActionSpace space() const { return space_; }

    double gripper(Eigen::Index step) const { return values_(step, layout_.gripper_index()); }

    // Row-major flattening (step-major), the layout used by every network head.
    Eigen::VectorXd flatten() const;
    static ActionChunk unflatten(const Eigen::VectorXd& flat, Eigen::Index horizon,
                                 ChannelLayout layout, ActionSpace space);

private:
    Eigen::MatrixXd values_;
    ChannelLayout layout_;
    ActionSpace space_;
};

/// Per-channel affine standardization. Also used for observation features.
class Standardizer {
public:
    static constexpr double kMinStd = 1e-6;

    Standardizer() = default;
    Standardizer(Eigen::VectorXd mean, Eigen::VectorXd std);

    static Standardizer identity(Eigen::Index dims);

    // Fits per-column mean/std over the rows of `samples`; rows with a zero
    // weight are ignored. Std entries are clamped to kMinStd.
    static Standardizer fit(const Eigen::MatrixXd& samples);
    static Standardizer fit(const Eigen::MatrixXd& samples, const Eigen::VectorXd& row_weights);

    Eigen::Index dims() const { return mean_.size(); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& std() const { return std_; }

    Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
    Eigen::VectorXd inverse(const Eigen::VectorXd& z) const;
    double transform_channel(Eigen::Index channel, double x) const;

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd std_;
};

ActionChunk standardize(const ActionChunk& chunk, const Standardizer& s);
ActionChunk destandardize(const ActionChunk& chunk, const Standardizer& s);

// Distance over the position+rotation channels of two per-step actions. The
// gripper channel never contributes.
double continuous_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                           const Eigen::Ref<const Eigen::RowVectorXd>& b,
                           const ChannelLayout& layout,
                           DistanceMetric metric = DistanceMetric::l2);

// Same, for step `step` of two standardized chunks. Raw-tagged chunks throw.
double continuous_distance(const ActionChunk& a, const ActionChunk& b, Eigen::Index step,
                           DistanceMetric metric = DistanceMetric::l2);

}  // namespace specflow
