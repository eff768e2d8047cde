#include "specflow/phase.hpp"

#include <algorithm>
#include <stdexcept>

namespace specflow {

int gripper_sign(double standardized_value) {
    return standardized_value > 0.0 ? 1 : -1;
}

bool detect_gripper_switch(std::span<const ActionChunk* const> chunks, int current_sign,
                           int window) {
    if (current_sign != 1 && current_sign != -1) {
        throw std::invalid_argument("detect_gripper_switch: current sign must be +1 or -1");
    }
    if (window < 0) {
        throw std::invalid_argument("detect_gripper_switch: negative window");
    }
    for (const ActionChunk* chunk : chunks) {
        if (chunk->space() != ActionSpace::standardized) {
            throw std::invalid_argument("detect_gripper_switch: chunks must be standardized");
        }
        const Eigen::Index steps =
            window == 0 ? chunk->horizon() : std::min<Eigen::Index>(window, chunk->horizon());
        for (Eigen::Index h = 0; h < steps; ++h) {
            if (chunk->gripper(h) * current_sign <= 0.0) return true;
        }
    }
    return false;
}

}  // namespace specflow
