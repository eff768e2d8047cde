#pragma once

#include <span>

#include "specflow/actions.hpp"

namespace specflow {

// +1 when the standardized gripper value is positive, -1 otherwise.
int gripper_sign(double standardized_value);

// True iff any scanned step in any chunk has a standardized gripper value on
// the other side of zero from `current_sign` (an exact zero counts as a switch).
// `window` limits the scan to the first steps of each chunk; 0 scans everything.
bool detect_gripper_switch(std::span<const ActionChunk* const> chunks, int current_sign,
                           int window = 0);

}  // namespace specflow
