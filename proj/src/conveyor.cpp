#include "specflow/conveyor.hpp"

#include <cmath>
#include <stdexcept>

#include "specflow/rng.hpp"

namespace specflow {

std::vector<std::string> SpeedGrid::names() {
    return {"demo", "medium", "high", "extra_high"};
}

double SpeedGrid::meters_per_minute(const std::string& name) const {
    if (name == "demo") return demo;
    if (name == "medium") return medium;
    if (name == "high") return high;
    if (name == "extra_high") return extra_high;
    throw std::invalid_argument("unknown belt speed '" + name + "'");
}

double SpeedGrid::units_per_tick(const std::string& name) const {
    return meters_per_minute(name) * units_per_tick_per_mpm;
}

void SpeedGrid::validate() const {
    if (!(demo >= 0.0 && demo < medium && medium < high && high < extra_high)) {
        throw std::invalid_argument("speed grid must be strictly increasing");
    }
    if (!(units_per_tick_per_mpm > 0.0)) {
        throw std::invalid_argument("speed grid scale must be positive");
    }
}

int ConveyorConfig::variant_index(const std::string& name) const {
    for (std::size_t i = 0; i < variants.size(); ++i) {
        if (variants[i].name == name) return static_cast<int>(i);
    }
    throw std::invalid_argument("unknown object variant '" + name + "'");
}

void ConveyorConfig::validate() const {
    if (!(gripper_speed > 0.0) || max_ticks <= 0 || variants.empty()) {
        throw std::invalid_argument("conveyor config: gripper speed, max ticks and variants required");
    }
    if (!(bin_radius > 0.0)) throw std::invalid_argument("conveyor config: bin_radius must be positive");
    if (!(close_fraction > 0.0 && close_fraction <= 1.0)) {
        throw std::invalid_argument("conveyor config: close_fraction must be in (0, 1]");
    }
    if (!(intercept_margin > 0.0 && intercept_margin <= 1.0)) {
        throw std::invalid_argument("conveyor config: intercept_margin must be in (0, 1]");
    }
    for (const auto& v : variants) {
        if (!(v.grasp_radius > 0.0)) {
            throw std::invalid_argument("conveyor config: grasp radius must be positive");
        }
    }
    speeds.validate();
}

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::approach: return "approach";
        case Phase::grasp: return "grasp";
        case Phase::transport: return "transport";
        case Phase::release: return "release";
        case Phase::done: return "done";
    }
    return "?";
}

std::string to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::running: return "running";
        case Outcome::success: return "success";
        case Outcome::failure: return "failure";
    }
    return "?";
}

std::string to_string(FailureReason reason) {
    switch (reason) {
        case FailureReason::none: return "none";
        case FailureReason::dropped: return "dropped";
        case FailureReason::object_exited: return "object_exited";
        case FailureReason::timeout: return "timeout";
    }
    return "?";
}

ConveyorEnv::ConveyorEnv(ConveyorConfig cfg, double belt_speed, int variant, std::uint64_t seed)
    : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (variant < 0 || variant >= static_cast<int>(cfg_.variants.size())) {
        throw std::invalid_argument("conveyor: unknown variant index");
    }
    if (!(belt_speed >= 0.0)) {
        throw std::invalid_argument("conveyor: belt speed must be non-negative");
    }
    Rng rng = make_stream(seed, Stream::environment);
    const double oj = cfg_.object_start_jitter;
    const double gj = cfg_.gripper_start_jitter;
    state_.object = {cfg_.object_start_x + uniform(rng, -oj, oj), cfg_.belt_y};
    state_.gripper = cfg_.gripper_start + Eigen::Vector2d(uniform(rng, -gj, gj), uniform(rng, -gj, gj));
    state_.object_velocity = {belt_speed, 0.0};
    state_.belt_speed = belt_speed;
    state_.variant = variant;
    update_phase();
}

Observation ConveyorEnv::observe() const {
    Observation obs;
    obs.world_features.resize(kWorldDims);
    obs.world_features << state_.object.x(), state_.object.y(), state_.object_velocity.x(),
        cfg_.bin.x(), cfg_.bin.y();
    obs.task_id = state_.variant;
    obs.robot_state.resize(kStateDims);
    obs.robot_state << state_.gripper.x(), state_.gripper.y(), state_.closed ? 1.0 : -1.0;
    return obs;
}

StepResult ConveyorEnv::step(const Eigen::VectorXd& action) {
    if (state_.terminal()) {
        throw std::logic_error("conveyor: step() on a terminated episode");
    }
    if (action.size() != 3 || !action.allFinite()) {
        throw std::invalid_argument("conveyor: action must be a finite [x, y, g] vector");
    }
    Eigen::Vector2d delta = action.head<2>() - state_.gripper;
    const double norm = delta.norm();
    if (norm > cfg_.gripper_speed) delta *= cfg_.gripper_speed / norm;
    state_.gripper += delta;

    const double radius = grasp_radius();
    const bool want_closed = action(2) > 0.0;
    if (want_closed && !state_.closed) {
        state_.closed = true;
        ++state_.gripper_switches;
        // Closing on nothing is recoverable: the gripper can reopen and retry.
        state_.holding = (state_.gripper - state_.object).norm() <= radius;
    } else if (!want_closed && state_.closed) {
        state_.closed = false;
        ++state_.gripper_switches;
        if (state_.holding) {
            state_.holding = false;
            if ((state_.gripper - cfg_.bin).norm() <= cfg_.bin_radius) {
                state_.outcome = Outcome::success;
            } else {
                state_.outcome = Outcome::failure;
                state_.failure = FailureReason::dropped;
            }
        }
    }
    advance_world();
    update_phase();
    return {observe(), state_.phase, state_.terminal()};
}

int ConveyorEnv::hold(int ticks) {
    int elapsed = 0;
    while (elapsed < ticks && !state_.terminal()) {
        advance_world();
        update_phase();
        ++elapsed;
    }
    return elapsed;
}

void ConveyorEnv::advance_world() {
    const Eigen::Vector2d before = state_.object;
    if (state_.holding) {
        state_.object = state_.gripper;
    } else if (state_.outcome == Outcome::running) {
        state_.object.x() += state_.belt_speed;
    }
    state_.object_velocity = state_.object - before;
    ++state_.tick;
    if (state_.outcome != Outcome::running) return;
    if (!state_.holding && state_.object.x() > cfg_.workspace_x_max) {
        state_.outcome = Outcome::failure;
        state_.failure = FailureReason::object_exited;
    } else if (state_.tick >= cfg_.max_ticks) {
        state_.outcome = Outcome::failure;
        state_.failure = FailureReason::timeout;
    }
}

void ConveyorEnv::update_phase() {
    const double near = 2.0 * grasp_radius();
    if (state_.outcome == Outcome::success) {
        state_.phase = Phase::done;
    } else if (state_.holding) {
        state_.phase = (state_.gripper - cfg_.bin).norm() <= cfg_.bin_radius ? Phase::release : Phase::transport;
    } else {
        state_.phase = (state_.gripper - state_.object).norm() <= near ? Phase::grasp : Phase::approach;
    }
}

ChannelLayout conveyor_layout() {
    return ChannelLayout{2, 0};
}

PolicyShape conveyor_policy_shape(const ConveyorConfig& cfg, int horizon, int embedding_dims) {
    PolicyShape shape;
    shape.horizon = horizon;
    shape.layout = conveyor_layout();
    shape.world_dims = ConveyorEnv::kWorldDims;
    shape.state_dims = ConveyorEnv::kStateDims;
    shape.num_tasks = static_cast<int>(cfg.variants.size());
    shape.embedding_dims = embedding_dims;
    return shape;
}

Eigen::VectorXd rest_action(const Eigen::Vector2d& position) {
    Eigen::VectorXd a(3);
    a << position.x(), position.y(), -1.0;
    return a;
}

namespace {

Eigen::Vector2d clamp_step(const Eigen::Vector2d& delta, double max_norm) {
    const double n = delta.norm();
    return n > max_norm ? Eigen::Vector2d(delta * (max_norm / n)) : delta;
}

// Earliest belt point the gripper can reach no later than the object.
Eigen::Vector2d intercept_aim(const ConveyorState& s, const ConveyorConfig& cfg) {
    const double v = s.belt_speed;
    if (v <= 1e-12) return s.object;
    const double speed = cfg.gripper_speed * cfg.intercept_margin;
    const Eigen::Vector2d station(cfg.station_x, cfg.belt_y);
    if (s.object.x() <= cfg.station_x) {
        const double t_object = (cfg.station_x - s.object.x()) / v;
        const double t_gripper = (station - s.gripper).norm() / speed;
        if (t_gripper <= t_object) return station;
    }
    if (speed <= v) return {cfg.workspace_x_max, cfg.belt_y};
    auto slack = [&](double x) {
        return (x - s.object.x()) / v - (Eigen::Vector2d(x, cfg.belt_y) - s.gripper).norm() / speed;
    };
    double lo = s.object.x();
    double hi = lo + 1.0;
    while (slack(hi) < 0.0) hi += (hi - lo);
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (slack(mid) < 0.0 ? lo : hi) = mid;
    }
    return {hi, cfg.belt_y};
}

}  // namespace

Eigen::VectorXd expert_action(const ConveyorState& s, const ConveyorConfig& cfg) {
    if (s.terminal()) return rest_action(s.gripper);
    const double radius = cfg.variants[static_cast<std::size_t>(s.variant)].grasp_radius;
    const double tolerance = cfg.close_fraction * radius;
    Eigen::VectorXd a(3);
    if (!s.holding) {
        const Eigen::Vector2d next =
            s.gripper + clamp_step(intercept_aim(s, cfg) - s.gripper, cfg.gripper_speed);
        const bool close = (next - s.object).norm() <= tolerance;
        a << next.x(), next.y(), close ? 1.0 : -1.0;
    } else {
        const Eigen::Vector2d next = s.gripper + clamp_step(cfg.bin - s.gripper, cfg.gripper_speed);
        const bool settled = (next - s.gripper).norm() < 1e-12;
        const bool open = settled && (next - cfg.bin).norm() <= tolerance;
        a << next.x(), next.y(), open ? -1.0 : 1.0;
    }
    return a;
}

ActionChunk expert_chunk(const ConveyorEnv& env, int horizon) {
    if (horizon <= 0) throw std::invalid_argument("expert_chunk: horizon must be positive");
    ConveyorEnv sim = env;
    Eigen::MatrixXd values(horizon, 3);
    for (int h = 0; h < horizon; ++h) {
        const Eigen::VectorXd a = expert_action(sim.state(), sim.config());
        values.row(h) = a.transpose();
        if (!sim.state().terminal()) sim.step(a);
    }
    return ActionChunk(std::move(values), conveyor_layout(), ActionSpace::raw);
}

}  // namespace specflow
