#include "specflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "specflow/phase.hpp"

namespace specflow {

Distribution Distribution::of(std::vector<double> values) {
    Distribution d;
    d.count = static_cast<int>(values.size());
    if (values.empty()) return d;
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    d.mean = sum / static_cast<double>(values.size());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    d.median = quantile(0.5);
    d.p90 = quantile(0.9);
    d.max = values.back();
    return d;
}

namespace {

double reconstruction_gap(const VelocityField& field, const ActionChunk& chunk, const ActionChunk& noise,
                          const ConditioningCache& cache, const Eigen::VectorXd& state,
                          const VerifierConfig& cfg) {
    double gap = 0.0;
    for (double tau : cfg.timesteps) {
        const ActionChunk rec = reconstruct_endpoint(field, chunk, noise, tau, cache, state);
        for (Eigen::Index h = 0; h < chunk.horizon(); ++h) {
            gap = std::max(gap, continuous_distance(chunk, rec, h, cfg.metric));
        }
    }
    return gap;
}

}  // namespace

ErrorDecomposition measure_error_decomposition(const VelocityField& field, const EncodeFn& encode,
                                               const std::vector<DiagnosticState>& states,
                                               const VerifierConfig& verifier, const DenoiseConfig& denoise_cfg,
                                               std::uint64_t seed) {
    verifier.validate();
    std::vector<double> ae;
    std::vector<double> cond;
    std::vector<double> endpoint;
    int exceed = 0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const DiagnosticState& s = states[i];
        const ConditioningCache fresh = encode(s.fresh);
        const ConditioningCache stale = encode(s.stale);
        const Eigen::VectorXd& state = s.fresh.robot_state;
        Rng rng = make_stream(seed, Stream::diagnostics, i);
        const ActionChunk target = denoise(field, fresh, state, denoise_cfg, rng);
        const ActionChunk noise = sample_noise(target.horizon(), target.layout(), rng);

        const double e_ae = reconstruction_gap(field, target, noise, fresh, state, verifier);
        const double e_stale = reconstruction_gap(field, target, noise, stale, state, verifier);
        ae.push_back(e_ae);
        cond.push_back(e_stale - e_ae);

        const VerifierReport r = verify(field, s.draft, stale, state, verifier, gripper_sign(s.draft.gripper(0)), rng());
        if (r.prefix > 0) {
            double d = 0.0;
            for (Eigen::Index h = 0; h < r.prefix; ++h) {
                d = std::max(d, continuous_distance(s.draft, target, h, verifier.metric));
            }
            endpoint.push_back(d);
            if (d > verifier.delta + e_ae + std::max(0.0, e_stale - e_ae)) ++exceed;
        }
    }
    ErrorDecomposition out;
    out.states = static_cast<int>(states.size());
    out.accepted = static_cast<int>(endpoint.size());
    out.exceed_fraction = endpoint.empty() ? 0.0 : static_cast<double>(exceed) / static_cast<double>(endpoint.size());
    out.eps_ae = Distribution::of(std::move(ae));
    out.eps_cond = Distribution::of(std::move(cond));
    out.endpoint = Distribution::of(std::move(endpoint));
    return out;
}

nlohmann::json to_json(const ErrorDecomposition& d) {
    auto dist = [](const Distribution& x) {
        return nlohmann::json{{"count", x.count}, {"mean", x.mean}, {"median", x.median}, {"p90", x.p90}, {"max", x.max}};
    };
    return {{"states", d.states},
            {"accepted", d.accepted},
            {"exceed_fraction", d.exceed_fraction},
            {"eps_ae", dist(d.eps_ae)},
            {"eps_cond", dist(d.eps_cond)},
            {"endpoint", dist(d.endpoint)}};
}

}  // namespace specflow
