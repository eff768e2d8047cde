#include "specflow/oracle.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "specflow/verifier.hpp"

namespace specflow {

StraightLineField::StraightLineField(ActionChunk target) : target_(std::move(target)) {
    if (target_.space() != ActionSpace::standardized) {
        throw std::invalid_argument("StraightLineField: target must be standardized");
    }
}

Eigen::MatrixXd StraightLineField::evaluate(const Eigen::MatrixXd& noisy, double tau,
                                            const ConditioningCache&, const Eigen::VectorXd&) const {
    if (tau >= 1.0) return target_.values() - noisy;
    return (target_.values() - noisy) / (1.0 - tau);
}

ConstantField::ConstantField(Eigen::MatrixXd c, ChannelLayout layout) : c_(std::move(c)), layout_(layout) {
    layout_.validate();
    if (c_.cols() != layout_.dims()) throw std::invalid_argument("ConstantField: column count must match layout");
}

Eigen::MatrixXd ConstantField::evaluate(const Eigen::MatrixXd&, double, const ConditioningCache&,
                                        const Eigen::VectorXd&) const {
    return c_;
}

namespace {

int brute_prefix(const std::vector<double>& d, double delta) {
    int n = 0;
    while (n < static_cast<int>(d.size()) && d[static_cast<std::size_t>(n)] <= delta) ++n;
    return n;
}

ActionChunk random_chunk(Eigen::Index horizon, const ChannelLayout& layout, Rng& rng) {
    return ActionChunk(gaussian_matrix(horizon, layout.dims(), rng), layout, ActionSpace::standardized);
}

// Multiples of 1/64 in [-4, 4]: sums of a few of them are exact in binary.
Eigen::MatrixXd dyadic_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::uniform_int_distribution<int> dist(-256, 256);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng) / 64.0;
    }
    return m;
}

SelftestCase verifier_exactness(Rng& rng) {
    const ChannelLayout layout;
    const ConditioningCache cache;
    const Eigen::VectorXd state = Eigen::VectorXd::Zero(3);
    double worst = 0.0;
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
        const ActionChunk draft = random_chunk(50, layout, rng);
        const StraightLineField field(draft);
        for (int k : {1, 2, 4}) {
            VerifierConfig cfg;
            cfg.timesteps = evenly_spaced_timesteps(k);
            const VerifierReport r = verify(field, draft, cache, state, cfg, 1, rng());
            worst = std::max(worst, r.distances.maxCoeff());
            if (r.prefix != 50) ++bad;
        }
    }
    std::ostringstream os;
    os << "300 verifications, " << bad << " with L < H, max distance " << worst;
    return {"verifier_exactness", bad == 0 && worst <= 1e-9, os.str()};
}

SelftestCase euler_constant(Rng& rng) {
    const ChannelLayout layout;
    const ConditioningCache cache;
    const Eigen::VectorXd state = Eigen::VectorXd::Zero(3);
    bool exact = true;
    double worst10 = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Eigen::MatrixXd a0 = dyadic_matrix(50, layout.dims(), rng);
        const Eigen::MatrixXd c = dyadic_matrix(50, layout.dims(), rng);
        const ConstantField field(c, layout);
        const ActionChunk noise(a0, layout, ActionSpace::standardized);
        for (int n : {1, 2, 4, 8}) {
            const ActionChunk out = denoise_from(field, cache, state, {n}, noise);
            exact = exact && (out.values().array() == (a0 + c).array()).all();
        }
        const ActionChunk out10 = denoise_from(field, cache, state, {10}, noise);
        worst10 = std::max(worst10, (out10.values() - (a0 + c)).cwiseAbs().maxCoeff());
    }
    std::ostringstream os;
    os << "dyadic N in {1,2,4,8} " << (exact ? "bit-exact" : "NOT exact") << ", N=10 max error " << worst10;
    return {"euler_constant_field", exact && worst10 <= 1e-12, os.str()};
}

SelftestCase euler_oracle(Rng& rng) {
    const ChannelLayout layout;
    const ConditioningCache cache;
    const Eigen::VectorXd state = Eigen::VectorXd::Zero(3);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const ActionChunk target = random_chunk(50, layout, rng);
        const StraightLineField field(target);
        for (int n : {1, 10}) {
            const ActionChunk out = denoise(field, cache, state, {n}, rng);
            worst = std::max(worst, (out.values() - target.values()).cwiseAbs().maxCoeff());
        }
    }
    std::ostringstream os;
    os << "N in {1,10}, max endpoint error " << worst;
    return {"euler_oracle_field", worst <= 1e-9, os.str()};
}

SelftestCase prefix_bruteforce(Rng& rng) {
    const double delta = 0.5;
    int mismatches = 0;
    for (int mask = 0; mask < 256; ++mask) {
        std::vector<double> d(8);
        for (int h = 0; h < 8; ++h) d[static_cast<std::size_t>(h)] = (mask >> h) & 1 ? 1.0 : 0.0;
        if (prefix_length(d, delta) != brute_prefix(d, delta)) ++mismatches;
    }
    std::uniform_int_distribution<int> len(0, 64);
    for (int i = 0; i < 10000; ++i) {
        std::vector<double> d(static_cast<std::size_t>(len(rng)));
        for (auto& x : d) x = std::abs(uniform(rng, -0.3, 0.3)) + (uniform(rng, 0, 1) < 0.05 ? 0.3 : 0.0);
        const double dl = uniform(rng, 0.0, 0.35);
        if (prefix_length(d, dl) != brute_prefix(d, dl)) ++mismatches;
    }
    return {"prefix_bruteforce", mismatches == 0,
            "256 patterns + 10000 random vectors, " + std::to_string(mismatches) + " mismatches"};
}

}  // namespace

std::vector<SelftestCase> run_selftest(std::uint64_t seed) {
    Rng rng = make_stream(seed, Stream::diagnostics);
    return {verifier_exactness(rng), euler_constant(rng), euler_oracle(rng), prefix_bruteforce(rng)};
}

}  // namespace specflow
