#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specflow/flow_policy.hpp"

namespace specflow {

/// Analytic field whose flow lines are straight paths into a fixed target:
/// v(A, tau) = (A* - A) / (1 - tau). Its single-step endpoint estimate is A*
/// from any point on the path.
class StraightLineField final : public VelocityField {
public:
    explicit StraightLineField(ActionChunk target);

    Eigen::Index horizon() const override { return target_.horizon(); }
    ChannelLayout layout() const override { return target_.layout(); }
    const ActionChunk& target() const { return target_; }

protected:
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& noisy, double tau, const ConditioningCache& cache,
                             const Eigen::VectorXd& robot_state) const override;

private:
    ActionChunk target_;
};

/// v = c everywhere.
class ConstantField final : public VelocityField {
public:
    ConstantField(Eigen::MatrixXd c, ChannelLayout layout);

    Eigen::Index horizon() const override { return c_.rows(); }
    ChannelLayout layout() const override { return layout_; }

protected:
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& noisy, double tau, const ConditioningCache& cache,
                             const Eigen::VectorXd& robot_state) const override;

private:
    Eigen::MatrixXd c_;
    ChannelLayout layout_;
};

struct SelftestCase {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Oracle-field verifier and Euler checks plus the brute-force prefix sweep.
std::vector<SelftestCase> run_selftest(std::uint64_t seed);

}  // namespace specflow
