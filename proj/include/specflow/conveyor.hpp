#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specflow/actions.hpp"
#include "specflow/flow_policy.hpp"

namespace specflow {

struct ObjectVariant {
    std::string name;
    double grasp_radius = 0.08;
};

/// Named belt speeds in m/min and the scale that maps them to units/tick.
struct SpeedGrid {
    double demo = 6.0;
    double medium = 10.0;
    double high = 13.0;
    double extra_high = 15.0;
    double units_per_tick_per_mpm = 0.001;

    static std::vector<std::string> names();
    double meters_per_minute(const std::string& name) const;
    double units_per_tick(const std::string& name) const;
    void validate() const;
};

struct ConveyorConfig {
    double gripper_speed = 0.02;  // max gripper displacement per tick
    double belt_y = 0.0;
    double station_x = 1.0;       // preferred pick-up point on the belt
    double workspace_x_max = 1.4; // object is lost past this point
    Eigen::Vector2d bin{0.6, 1.6};
    double bin_radius = 0.2;       // releasing a held object inside this radius scores
    double object_start_x = -0.14;
    double object_start_jitter = 0.05;
    Eigen::Vector2d gripper_start{0.6, 1.6};
    double gripper_start_jitter = 0.1;
    double close_fraction = 0.4;   // expert closes/opens inside this fraction of the radius
    double intercept_margin = 0.9; // fraction of gripper speed the expert plans with
    int max_ticks = 600;
    std::vector<ObjectVariant> variants{{"toy_dog", 0.08}, {"hairbrush", 0.04}};
    SpeedGrid speeds;

    int variant_index(const std::string& name) const;
    void validate() const;
};

enum class Phase { approach, grasp, transport, release, done };
enum class Outcome { running, success, failure };
enum class FailureReason { none, dropped, object_exited, timeout };

std::string to_string(Phase phase);
std::string to_string(Outcome outcome);
std::string to_string(FailureReason reason);

struct ConveyorState {
    Eigen::Vector2d object = Eigen::Vector2d::Zero();
    Eigen::Vector2d object_velocity = Eigen::Vector2d::Zero();
    Eigen::Vector2d gripper = Eigen::Vector2d::Zero();
    bool closed = false;
    bool holding = false;
    long tick = 0;
    double belt_speed = 0.0;
    int variant = 0;
    Phase phase = Phase::approach;
    Outcome outcome = Outcome::running;
    FailureReason failure = FailureReason::none;
    int gripper_switches = 0;

    bool terminal() const { return outcome != Outcome::running; }
};

struct StepResult {
    Observation obs;
    Phase phase;
    bool terminal;
};

/// 2-D kinematic point gripper over a conveyor belt running along +x.
class ConveyorEnv {
public:
    static constexpr int kWorldDims = 5;
    static constexpr int kStateDims = 3;

    ConveyorEnv(ConveyorConfig cfg, double belt_speed, int variant, std::uint64_t seed);

    const ConveyorConfig& config() const { return cfg_; }
    const ConveyorState& state() const { return state_; }
    double grasp_radius() const { return cfg_.variants[static_cast<std::size_t>(state_.variant)].grasp_radius; }

    Observation observe() const;

    // One control tick with a raw action [x, y, g]: the gripper moves toward the
    // target position at most gripper_speed per tick; g > 0 commands closed.
    StepResult step(const Eigen::VectorXd& action);

    // World advances while the robot holds its pose (blocking inference).
    // Returns the number of ticks that actually elapsed before termination.
    int hold(int ticks);

private:
    void advance_world();
    void update_phase();

    ConveyorConfig cfg_;
    ConveyorState state_;
};

ChannelLayout conveyor_layout();
PolicyShape conveyor_policy_shape(const ConveyorConfig& cfg, int horizon, int embedding_dims);

// Analytic intercept controller evaluated on the current state.
Eigen::VectorXd expert_action(const ConveyorState& state, const ConveyorConfig& cfg);

// The next `horizon` expert actions rolled out on a copy of `env`; steps past
// termination repeat the rest action (hold position, gripper open).
ActionChunk expert_chunk(const ConveyorEnv& env, int horizon);

Eigen::VectorXd rest_action(const Eigen::Vector2d& position);

}  // namespace specflow
