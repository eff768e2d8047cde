#include "specflow/runtime.hpp"

#include <algorithm>

#include "specflow/phase.hpp"
#include "specflow/rng.hpp"

namespace specflow {

std::string to_string(RunMode mode) {
    return mode == RunMode::flash ? "flash" : "full_only";
}

std::string to_string(FallbackLatency mode) {
    return mode == FallbackLatency::additive ? "additive" : "full_only";
}

std::string to_string(RoundKind kind) {
    switch (kind) {
        case RoundKind::full: return "full";
        case RoundKind::flash_accepted: return "flash_accepted";
        case RoundKind::flash_rejected_fallback: return "flash_rejected_fallback";
        case RoundKind::flash_phase_fallback: return "flash_phase_fallback";
        case RoundKind::periodic_refresh: return "periodic_refresh";
    }
    return "?";
}

RunMode parse_run_mode(const std::string& name) {
    if (name == "flash") return RunMode::flash;
    if (name == "full_only") return RunMode::full_only;
    throw std::invalid_argument("unknown run mode '" + name + "'");
}

FallbackLatency parse_fallback_latency(const std::string& name) {
    if (name == "additive") return FallbackLatency::additive;
    if (name == "full_only") return FallbackLatency::full_only;
    throw std::invalid_argument("unknown fallback latency accounting '" + name + "'");
}

RoundKind parse_round_kind(const std::string& name) {
    for (auto k : {RoundKind::full, RoundKind::flash_accepted, RoundKind::flash_rejected_fallback,
                   RoundKind::flash_phase_fallback, RoundKind::periodic_refresh}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown round path '" + name + "'");
}

void RuntimePolicy::validate(int horizon) const {
    if (replan < 1 || replan > horizon) {
        throw std::invalid_argument("runtime: replan size must satisfy 1 <= R <= H");
    }
    if (periodic_refresh < 0) throw std::invalid_argument("runtime: PF must be >= 0");
    if (denoise.num_steps < 1) throw std::invalid_argument("runtime: denoise steps must be >= 1");
    verifier.validate();
}

EpisodeStats stats_from_trace(const std::vector<RoundRecord>& trace, int replan, bool success) {
    EpisodeStats s;
    s.success = success;
    s.rounds = static_cast<int>(trace.size());
    long accepted_actions = 0;
    for (const auto& r : trace) {
        s.total_latency_ms += r.latency_ms;
        s.executed_actions += r.executed_prefix;
        if (r.path == RoundKind::flash_accepted) {
            ++s.flash_accepted;
            accepted_actions += r.executed_prefix;
        }
    }
    if (s.rounds > 0) {
        s.flash_rate = static_cast<double>(s.flash_accepted) / s.rounds;
        s.latency_ms = s.total_latency_ms / s.rounds;
    }
    if (s.flash_accepted > 0) {
        s.acc = static_cast<double>(accepted_actions) / s.flash_accepted / replan;
    }
    if (s.executed_actions > 0) s.per_action_ms = s.total_latency_ms / s.executed_actions;
    return s;
}

int current_gripper_sign(const Observation& obs, const Standardizer& actions) {
    const Eigen::Index g = obs.robot_state.size() - 1;
    return gripper_sign(actions.transform_channel(actions.dims() - 1, obs.robot_state(g)));
}

FullOutput full_round(const Observation& obs, const PolicyModels& models, const DenoiseConfig& cfg,
                      int round, long tick, Rng& rng) {
    ConditioningCache cache = models.main.encode_context(obs, round, tick);
    ActionChunk chunk = denoise(models.main, cache, obs.robot_state, cfg, rng);
    return {std::move(chunk), std::move(cache)};
}

FlashOutput flash_round(const Observation& obs, const PolicyModels& models,
                        const RuntimePolicy& policy, const RunnerState& state,
                        std::uint64_t noise_seed) {
    if (!state.cache) throw std::logic_error("flash_round: no conditioning cache");
    if (!models.draft) throw std::logic_error("flash_round: no draft model");
    ActionChunk draft = models.draft->propose(obs);
    VerifierReport report = verify(models.main, draft, *state.cache, obs.robot_state,
                                   policy.verifier, current_gripper_sign(obs, models.actions),
                                   noise_seed);
    FlashOutput out{std::move(draft), std::move(report), FlashVerdict::reject, 0};
    if (policy.phase_fallback && out.report.gripper_switch_detected) {
        out.verdict = FlashVerdict::phase_switch;
    } else if (out.report.prefix > 0) {
        out.verdict = FlashVerdict::accept;
        out.executable = policy.cap_prefix_at_replan ? std::min(out.report.prefix, policy.replan)
                                                     : out.report.prefix;
    }
    return out;
}

namespace {

// The gripper command is the sign of the standardized channel, the same
// boundary the phase detector uses.
int execute(ConveyorEnv& env, const ActionChunk& chunk, const Standardizer& actions, int count) {
    const ActionChunk raw = destandardize(chunk, actions);
    const Eigen::Index g = chunk.layout().gripper_index();
    int done = 0;
    for (int i = 0; i < count && !env.state().terminal(); ++i, ++done) {
        Eigen::VectorXd a = raw.values().row(i).transpose();
        a(g) = static_cast<double>(gripper_sign(chunk.values()(i, g)));
        env.step(a);
    }
    return done;
}

VerifierSummary summarize(const VerifierReport& r) {
    VerifierSummary s;
    s.prefix = r.prefix;
    s.branch_prefixes = r.branch_prefixes;
    s.gripper_switch = r.gripper_switch_detected;
    s.noise_seed = r.noise_seed;
    if (r.prefix > 0) s.max_distance = r.distances.leftCols(r.prefix).maxCoeff();
    return s;
}

}  // namespace

EpisodeResult run_episode(ConveyorEnv& env, const RuntimePolicy& policy, const PolicyModels& models,
                          const CostProfile& profile, const LatencyCoupling& coupling,
                          std::uint64_t seed) {
    policy.validate(static_cast<int>(models.main.horizon()));
    profile.validate();
    const double full_ms = round_cost(profile, RoundPath::full);
    const double flash_ms =
        policy.mode == RunMode::flash ? round_cost(profile, RoundPath::flash) : 0.0;
    const int replan = policy.replan;

    EpisodeResult result;
    RunnerState state;
    int round = 0;
    try {
        while (!env.state().terminal()) {
            RoundRecord rec;
            rec.round = round;
            rec.tick = env.state().tick;
            rec.phase = env.state().phase;
            Observation obs = env.observe();

            auto run_full = [&](const Observation& o) {
                Rng rng = make_stream(seed, Stream::full_path, static_cast<std::uint64_t>(round));
                FullOutput out = full_round(o, models, policy.denoise, round, env.state().tick, rng);
                state.cache = std::move(out.cache);
                state.flash_since_full = 0;
                state.last_full_round = round;
                return std::move(out.chunk);
            };

            const bool need_full = policy.mode == RunMode::full_only || !state.cache;
            const bool refresh = !need_full && policy.periodic_refresh > 0 &&
                                 state.flash_since_full >= policy.periodic_refresh;
            if (need_full || refresh) {
                rec.path = refresh ? RoundKind::periodic_refresh : RoundKind::full;
                const ActionChunk chunk = run_full(obs);
                rec.latency_ms = full_ms;
                rec.stall_ticks = stall_ticks(full_ms, coupling);
                env.hold(rec.stall_ticks);
                rec.executed_prefix = execute(env, chunk, models.actions, replan);
            } else {
                rec.cache_round = state.cache->captured_round;
                const std::uint64_t noise_seed =
                    mix_seed(seed, static_cast<std::uint64_t>(Stream::verify),
                             static_cast<std::uint64_t>(round));
                FlashOutput flash = flash_round(obs, models, policy, state, noise_seed);
                rec.verifier = summarize(flash.report);
                if (flash.verdict == FlashVerdict::accept) {
                    rec.path = RoundKind::flash_accepted;
                    rec.latency_ms = flash_ms;
                    rec.stall_ticks = stall_ticks(flash_ms, coupling);
                    env.hold(rec.stall_ticks);
                    rec.executed_prefix = execute(env, flash.draft, models.actions, flash.executable);
                    ++state.flash_since_full;
                } else {
                    rec.path = flash.verdict == FlashVerdict::phase_switch
                                   ? RoundKind::flash_phase_fallback
                                   : RoundKind::flash_rejected_fallback;
                    // Under additive accounting the flash attempt's time passes
                    // first and the full path starts from a fresh observation.
                    if (policy.fallback_latency == FallbackLatency::additive) {
                        const int flash_stall = stall_ticks(flash_ms, coupling);
                        env.hold(flash_stall);
                        rec.latency_ms = flash_ms + full_ms;
                        rec.stall_ticks = flash_stall + stall_ticks(full_ms, coupling);
                        obs = env.observe();
                    } else {
                        rec.latency_ms = full_ms;
                        rec.stall_ticks = stall_ticks(full_ms, coupling);
                    }
                    const ActionChunk chunk = run_full(obs);
                    env.hold(stall_ticks(full_ms, coupling));
                    rec.executed_prefix = execute(env, chunk, models.actions, replan);
                }
            }
            result.trace.push_back(std::move(rec));
            ++round;
        }
    } catch (const std::exception& e) {
        throw EpisodeError("episode failed at round " + std::to_string(round) + ": " + e.what(),
                           std::move(result.trace));
    }
    const bool success = env.state().outcome == Outcome::success;
    result.stats = stats_from_trace(result.trace, replan, success);
    result.failure = env.state().failure;
    result.ticks = env.state().tick;
    return result;
}

}  // namespace specflow
