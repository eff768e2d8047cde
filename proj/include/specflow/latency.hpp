#pragma once

#include <optional>
#include <string>
#include <vector>

namespace specflow {

struct FullStages {
    double image_encoder = 0.0;
    double prefill = 0.0;
    double denoise = 0.0;
    double total() const { return image_encoder + prefill + denoise; }
};

struct FlashStages {
    double image_encoder = 0.0;
    double draft = 0.0;
    double verify = 0.0;
    double total() const { return image_encoder + draft + verify; }
};

/// Per-stage inference latencies (ms) for one runtime implementation.
struct CostProfile {
    std::string name;
    FullStages full;
    std::optional<FlashStages> flash;

    // Throws on negative stage costs.
    void validate() const;
};

enum class RoundPath { full, flash };

// Built-ins: torch, triton, flash, flash_triton (measured stage costs on an RTX 4090D).
CostProfile builtin_profile(const std::string& name);
std::vector<std::string> builtin_profile_names();

// Throws when asking a profile without flash stages for the flash path.
double round_cost(const CostProfile& profile, RoundPath path);

struct LatencyCoupling {
    double control_tick_ms = 10.0;
    void validate() const;
};

// World ticks that elapse while the robot blocks on an inference of `latency_ms`.
int stall_ticks(double latency_ms, const LatencyCoupling& coupling);

struct BlendedLatency {
    double latency_ms = 0.0;     // mean per round
    double per_action_ms = 0.0;  // latency / mean executed actions per round
};

// Lat = FR * flash + (1 - FR) * full; flash rounds execute acc * R actions,
// full rounds execute R.
BlendedLatency blended_latency(double flash_rate, double acc_prefix_mean,
                               const CostProfile& profile, int replan_size);

}  // namespace specflow
