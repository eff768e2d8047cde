#include "specflow/latency.hpp"

#include <cmath>
#include <stdexcept>

namespace specflow {

void CostProfile::validate() const {
    auto check = [&](double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("cost profile '" + name + "': stage costs must be >= 0");
        }
    };
    check(full.image_encoder);
    check(full.prefill);
    check(full.denoise);
    if (flash) {
        check(flash->image_encoder);
        check(flash->draft);
        check(flash->verify);
    }
}

CostProfile builtin_profile(const std::string& name) {
    if (name == "torch") return {"torch", {11.3, 26.7, 20.0}, std::nullopt};
    if (name == "triton") return {"triton", {4.7, 22.4, 12.6}, std::nullopt};
    if (name == "flash") return {"flash", {11.3, 26.7, 20.0}, FlashStages{11.0, 3.5, 3.4}};
    if (name == "flash_triton") {
        return {"flash_triton", {4.7, 22.4, 12.6}, FlashStages{4.7, 0.9, 2.2}};
    }
    throw std::invalid_argument("unknown cost profile '" + name + "'");
}

std::vector<std::string> builtin_profile_names() {
    return {"torch", "triton", "flash", "flash_triton"};
}

double round_cost(const CostProfile& profile, RoundPath path) {
    if (path == RoundPath::full) return profile.full.total();
    if (!profile.flash) {
        throw std::invalid_argument("cost profile '" + profile.name + "' has no flash path");
    }
    return profile.flash->total();
}

void LatencyCoupling::validate() const {
    if (!(control_tick_ms > 0.0)) {
        throw std::invalid_argument("latency coupling: control tick must be positive");
    }
}

int stall_ticks(double latency_ms, const LatencyCoupling& coupling) {
    coupling.validate();
    if (!(latency_ms >= 0.0)) {
        throw std::invalid_argument("stall_ticks: negative latency");
    }
    // Guard against 58.0 / 10.0 landing a hair above an integer.
    const double ticks = latency_ms / coupling.control_tick_ms;
    const double rounded = std::round(ticks);
    if (std::abs(ticks - rounded) < 1e-9) return static_cast<int>(rounded);
    return static_cast<int>(std::ceil(ticks));
}

BlendedLatency blended_latency(double flash_rate, double acc_prefix_mean,
                               const CostProfile& profile, int replan_size) {
    if (!(flash_rate >= 0.0 && flash_rate <= 1.0) || !(acc_prefix_mean >= 0.0) || replan_size < 1) {
        throw std::invalid_argument("blended_latency: FR must be in [0,1], Acc >= 0, R >= 1");
    }
    const double full = round_cost(profile, RoundPath::full);
    const double flash = flash_rate > 0.0 ? round_cost(profile, RoundPath::flash) : 0.0;
    BlendedLatency out;
    out.latency_ms = flash_rate * flash + (1.0 - flash_rate) * full;
    const double actions =
        flash_rate * acc_prefix_mean * replan_size + (1.0 - flash_rate) * replan_size;
    out.per_action_ms = actions > 0.0 ? out.latency_ms / actions : 0.0;
    return out;
}

}  // namespace specflow
