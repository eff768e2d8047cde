#include "specflow/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "specflow/pipeline.hpp"
#include "specflow/rng.hpp"

#ifndef SPECFLOW_VERSION
#define SPECFLOW_VERSION "0.0.0"
#endif

namespace specflow {

using nlohmann::json;

std::string code_version() { return SPECFLOW_VERSION; }

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

Phase parse_phase(const std::string& s) {
    for (auto p : {Phase::approach, Phase::grasp, Phase::transport, Phase::release, Phase::done}) {
        if (to_string(p) == s) return p;
    }
    throw std::invalid_argument("unknown phase '" + s + "'");
}

FailureReason parse_failure(const std::string& s) {
    for (auto f : {FailureReason::none, FailureReason::dropped, FailureReason::object_exited,
                   FailureReason::timeout}) {
        if (to_string(f) == s) return f;
    }
    throw std::invalid_argument("unknown failure reason '" + s + "'");
}

bool is_flash_path(RoundKind k) {
    return k == RoundKind::flash_accepted || k == RoundKind::flash_rejected_fallback ||
           k == RoundKind::flash_phase_fallback;
}

}  // namespace

// --- conditions -------------------------------------------------------------

std::string Condition::label() const {
    std::string s = method.label() + "@" + speed + "/" + variant;
    if (method.mode == RunMode::flash) {
        s += " d=" + short_num(runtime.verifier.delta) +
             " K=" + std::to_string(runtime.verifier.timesteps.size()) +
             " pf=" + std::to_string(runtime.periodic_refresh) +
             " fb=" + std::to_string(runtime.phase_fallback ? 1 : 0);
    }
    return s;
}

Condition make_condition(const Config& cfg, const MethodSpec& method, const std::string& speed,
                         const std::string& variant) {
    cfg.env.speeds.units_per_tick(speed);
    cfg.env.variant_index(variant);
    const CostProfile& profile = cfg.profile(method.profile);
    if (method.mode == RunMode::flash && !profile.flash) {
        throw ConfigError("config: /bench/methods: profile '" + method.profile + "' has no flash path");
    }
    Condition c;
    c.method = method;
    c.speed = speed;
    c.variant = variant;
    c.runtime = cfg.runtime;
    c.runtime.mode = method.mode;
    return c;
}

std::vector<Condition> grid_conditions(const Config& cfg) {
    const BenchConfig& b = cfg.bench;
    std::vector<Condition> out;
    auto flash_methods = [&] {
        std::vector<MethodSpec> m;
        for (const auto& x : b.methods) {
            if (x.mode == RunMode::flash) m.push_back(x);
        }
        if (m.empty()) throw ConfigError("config: /bench/methods: ablation grids need a flash method");
        return m;
    };
    switch (b.grid) {
        case GridKind::main:
            for (const auto& speed : b.speeds) {
                for (const auto& variant : b.variants) {
                    for (const auto& m : b.methods) out.push_back(make_condition(cfg, m, speed, variant));
                }
            }
            break;
        case GridKind::verifier:
            for (const auto& m : flash_methods()) {
                for (const auto& speed : b.speeds) {
                    for (const auto& variant : b.variants) {
                        for (double d : b.deltas) {
                            for (int k : b.timestep_counts) {
                                Condition c = make_condition(cfg, m, speed, variant);
                                c.runtime.verifier.delta = d;
                                c.runtime.verifier.timesteps = evenly_spaced_timesteps(k);
                                out.push_back(std::move(c));
                            }
                        }
                    }
                }
            }
            break;
        case GridKind::components:
            for (const auto& m : flash_methods()) {
                for (const auto& speed : b.speeds) {
                    for (const auto& variant : b.variants) {
                        for (int pf : b.refresh_values) {
                            for (bool fb : b.fallback_values) {
                                Condition c = make_condition(cfg, m, speed, variant);
                                c.runtime.periodic_refresh = pf;
                                c.runtime.phase_fallback = fb;
                                out.push_back(std::move(c));
                            }
                        }
                    }
                }
            }
            break;
        case GridKind::single:
            if (b.methods.empty() || b.speeds.empty()) break;
            out.push_back(make_condition(cfg, b.methods.front(), b.speeds.front(), cfg.default_variant));
            break;
    }
    return out;
}

std::uint64_t episode_env_seed(std::uint64_t bench_seed, int trial) {
    return mix_seed(bench_seed, 0x656e76ULL, static_cast<std::uint64_t>(trial));
}

std::uint64_t episode_run_seed(std::uint64_t bench_seed, int trial) {
    return mix_seed(bench_seed, 0x72756eULL, static_cast<std::uint64_t>(trial));
}

// --- execution ----------------------------------------------------------------

std::vector<ConditionRuns> run_conditions(const Config& cfg, const PolicyModels& models,
                                          const std::vector<Condition>& conditions, int trials,
                                          std::uint64_t seed, int threads) {
    if (trials < 0) throw std::invalid_argument("bench: trials must be >= 0");
    std::vector<ConditionRuns> out(conditions.size());
    for (std::size_t c = 0; c < conditions.size(); ++c) {
        out[c].condition = conditions[c];
        out[c].episodes.resize(static_cast<std::size_t>(trials));
    }
    const std::size_t jobs = conditions.size() * static_cast<std::size_t>(trials);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs) return;
            const std::size_t c = j / static_cast<std::size_t>(trials);
            const int e = static_cast<int>(j % static_cast<std::size_t>(trials));
            try {
                const Condition& cond = conditions[c];
                EpisodeRun run;
                run.trial = e;
                run.env_seed = episode_env_seed(seed, e);
                run.run_seed = episode_run_seed(seed, e);
                ConveyorEnv env(cfg.env, cfg.env.speeds.units_per_tick(cond.speed),
                                cfg.env.variant_index(cond.variant), run.env_seed);
                EpisodeResult r = run_episode(env, cond.runtime, models, cfg.profile(cond.method.profile),
                                              cfg.coupling, run.run_seed);
                run.success = r.stats.success;
                run.failure = r.failure;
                run.ticks = r.ticks;
                run.stats = r.stats;
                run.trace = std::move(r.trace);
                out[c].episodes[static_cast<std::size_t>(e)] = std::move(run);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(jobs);
                return;
            }
        }
    };

    const int n = std::max(1, threads);
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

ConditionInfo describe(const Config& cfg, const Condition& c) {
    const CostProfile& profile = cfg.profile(c.method.profile);
    ConditionInfo i;
    i.label = c.label();
    i.method = c.method;
    i.speed = c.speed;
    i.variant = c.variant;
    i.replan = c.runtime.replan;
    i.delta = c.runtime.verifier.delta;
    i.timesteps = static_cast<int>(c.runtime.verifier.timesteps.size());
    i.pf = c.runtime.periodic_refresh;
    i.fb = c.runtime.phase_fallback;
    i.full_ms = round_cost(profile, RoundPath::full);
    i.flash_ms = profile.flash ? round_cost(profile, RoundPath::flash) : 0.0;
    i.tick_ms = cfg.coupling.control_tick_ms;
    i.additive_fallback = c.runtime.fallback_latency == FallbackLatency::additive;
    i.cap_prefix = c.runtime.cap_prefix_at_replan;
    return i;
}

// --- aggregation -----------------------------------------------------------------

SuiteReport aggregate(const std::string& fingerprint, std::uint64_t seed, int trials,
                      const std::string& baseline, double baseline_full_ms,
                      const std::vector<ConditionInfo>& infos,
                      const std::vector<std::vector<EpisodeRun>>& episodes) {
    if (infos.size() != episodes.size()) throw std::logic_error("aggregate: condition count mismatch");
    SuiteReport rep;
    rep.fingerprint = fingerprint;
    rep.code_version = code_version();
    rep.seed = seed;
    rep.trials = trials;
    rep.baseline = baseline;
    rep.baseline_full_ms = baseline_full_ms;
    for (std::size_t c = 0; c < infos.size(); ++c) {
        ConditionReport cr;
        cr.info = infos[c];
        cr.trials = static_cast<int>(episodes[c].size());
        double total_ms = 0.0;
        long accepted_actions = 0;
        int successes = 0;
        for (const auto& run : episodes[c]) {
            EpisodeSummary es;
            es.trial = run.trial;
            es.env_seed = run.env_seed;
            es.run_seed = run.run_seed;
            es.failure = run.failure;
            es.ticks = run.ticks;
            es.stats = stats_from_trace(run.trace, cr.info.replan, run.success);
            successes += run.success ? 1 : 0;
            for (const auto& r : run.trace) {
                total_ms += r.latency_ms;
                ++cr.rounds;
                cr.executed_actions += r.executed_prefix;
                if (r.path == RoundKind::flash_accepted) {
                    ++cr.flash_accepted;
                    accepted_actions += r.executed_prefix;
                }
            }
            cr.episodes.push_back(std::move(es));
        }
        if (cr.trials > 0) cr.sr = static_cast<double>(successes) / cr.trials;
        if (cr.rounds > 0) {
            cr.lat_ms = total_ms / static_cast<double>(cr.rounds);
            cr.fr = static_cast<double>(cr.flash_accepted) / static_cast<double>(cr.rounds);
        }
        if (cr.executed_actions > 0) cr.per_action_ms = total_ms / static_cast<double>(cr.executed_actions);
        if (cr.flash_accepted > 0) {
            cr.acc = static_cast<double>(accepted_actions) / static_cast<double>(cr.flash_accepted) /
                     cr.info.replan;
        }
        rep.conditions.push_back(std::move(cr));
    }
    for (auto& cr : rep.conditions) {
        double base = baseline_full_ms;
        for (const auto& other : rep.conditions) {
            if (other.info.method.label() == baseline && other.info.speed == cr.info.speed &&
                other.info.variant == cr.info.variant && other.rounds > 0) {
                base = other.lat_ms;
                break;
            }
        }
        cr.speedup = cr.lat_ms > 0.0 ? base / cr.lat_ms : 0.0;
    }
    return rep;
}

SuiteReport make_report(const Config& cfg, const std::vector<ConditionRuns>& runs, int trials,
                        std::uint64_t seed) {
    std::vector<ConditionInfo> infos;
    std::vector<std::vector<EpisodeRun>> episodes;
    for (const auto& r : runs) {
        infos.push_back(describe(cfg, r.condition));
        episodes.push_back(r.episodes);
    }
    const double base_ms = round_cost(cfg.profile(cfg.bench.baseline.profile), RoundPath::full);
    return aggregate(config_fingerprint(cfg), seed, trials, cfg.bench.baseline.label(), base_ms, infos,
                     episodes);
}

// --- JSON --------------------------------------------------------------------------

namespace {

json info_to_json(const ConditionInfo& i) {
    return {{"label", i.label},
            {"method", i.method.label()},
            {"speed", i.speed},
            {"variant", i.variant},
            {"replan", i.replan},
            {"delta", i.delta},
            {"timesteps", i.timesteps},
            {"pf", i.pf},
            {"fb", i.fb},
            {"full_ms", i.full_ms},
            {"flash_ms", i.flash_ms},
            {"tick_ms", i.tick_ms},
            {"additive_fallback", i.additive_fallback},
            {"cap_prefix", i.cap_prefix}};
}

ConditionInfo info_from_json(const json& j) {
    ConditionInfo i;
    i.label = j.at("label").get<std::string>();
    i.method = MethodSpec::parse(j.at("method").get<std::string>());
    i.speed = j.at("speed").get<std::string>();
    i.variant = j.at("variant").get<std::string>();
    i.replan = j.at("replan").get<int>();
    i.delta = j.at("delta").get<double>();
    i.timesteps = j.at("timesteps").get<int>();
    i.pf = j.at("pf").get<int>();
    i.fb = j.at("fb").get<bool>();
    i.full_ms = j.at("full_ms").get<double>();
    i.flash_ms = j.at("flash_ms").get<double>();
    i.tick_ms = j.at("tick_ms").get<double>();
    i.additive_fallback = j.at("additive_fallback").get<bool>();
    i.cap_prefix = j.at("cap_prefix").get<bool>();
    return i;
}

json stats_to_json(const EpisodeStats& s) {
    return {{"success", s.success},
            {"rounds", s.rounds},
            {"flash_accepted", s.flash_accepted},
            {"FR", s.flash_rate},
            {"Acc", s.acc},
            {"Lat_ms", s.latency_ms},
            {"per_action_ms", s.per_action_ms},
            {"total_latency_ms", s.total_latency_ms},
            {"executed_actions", s.executed_actions}};
}

EpisodeStats stats_from_json(const json& j) {
    EpisodeStats s;
    s.success = j.at("success").get<bool>();
    s.rounds = j.at("rounds").get<int>();
    s.flash_accepted = j.at("flash_accepted").get<int>();
    s.flash_rate = j.at("FR").get<double>();
    s.acc = j.at("Acc").get<double>();
    s.latency_ms = j.at("Lat_ms").get<double>();
    s.per_action_ms = j.at("per_action_ms").get<double>();
    s.total_latency_ms = j.at("total_latency_ms").get<double>();
    s.executed_actions = j.at("executed_actions").get<long>();
    return s;
}

bool same_stats(const EpisodeStats& a, const EpisodeStats& b) {
    return a.success == b.success && a.rounds == b.rounds && a.flash_accepted == b.flash_accepted &&
           a.flash_rate == b.flash_rate && a.acc == b.acc && a.latency_ms == b.latency_ms &&
           a.per_action_ms == b.per_action_ms && a.total_latency_ms == b.total_latency_ms &&
           a.executed_actions == b.executed_actions;
}

}  // namespace

json round_to_json(const RoundRecord& r) {
    json j{{"round", r.round},
           {"tick", r.tick},
           {"phase", to_string(r.phase)},
           {"path", to_string(r.path)},
           {"executed_prefix", r.executed_prefix},
           {"latency_ms", r.latency_ms},
           {"stall_ticks", r.stall_ticks},
           {"cache_round", r.cache_round}};
    if (r.verifier) {
        j["verifier"] = {{"prefix", r.verifier->prefix},
                         {"branch_prefixes", r.verifier->branch_prefixes},
                         {"gripper_switch", r.verifier->gripper_switch},
                         {"noise_seed", r.verifier->noise_seed},
                         {"max_distance", r.verifier->max_distance}};
    } else {
        j["verifier"] = nullptr;
    }
    return j;
}

RoundRecord round_from_json(const json& j) {
    RoundRecord r;
    r.round = j.at("round").get<int>();
    r.tick = j.at("tick").get<long>();
    r.phase = parse_phase(j.at("phase").get<std::string>());
    r.path = parse_round_kind(j.at("path").get<std::string>());
    r.executed_prefix = j.at("executed_prefix").get<int>();
    r.latency_ms = j.at("latency_ms").get<double>();
    r.stall_ticks = j.at("stall_ticks").get<int>();
    r.cache_round = j.at("cache_round").get<int>();
    const json& v = j.at("verifier");
    if (!v.is_null()) {
        VerifierSummary s;
        s.prefix = v.at("prefix").get<int>();
        s.branch_prefixes = v.at("branch_prefixes").get<std::vector<int>>();
        s.gripper_switch = v.at("gripper_switch").get<bool>();
        s.noise_seed = v.at("noise_seed").get<std::uint64_t>();
        s.max_distance = v.at("max_distance").get<double>();
        r.verifier = std::move(s);
    }
    return r;
}

void write_trace(std::ostream& out, const SuiteReport& report, const std::vector<ConditionRuns>& runs) {
    if (runs.size() != report.conditions.size()) throw std::logic_error("write_trace: condition count mismatch");
    json infos = json::array();
    for (const auto& c : report.conditions) infos.push_back(info_to_json(c.info));
    out << json{{"type", "header"},
                {"fingerprint", report.fingerprint},
                {"seed", report.seed},
                {"trials", report.trials},
                {"baseline", report.baseline},
                {"baseline_full_ms", report.baseline_full_ms},
                {"conditions", infos}}
               .dump()
        << "\n";
    for (std::size_t c = 0; c < runs.size(); ++c) {
        for (const auto& e : runs[c].episodes) {
            for (const auto& r : e.trace) {
                json j = round_to_json(r);
                j["type"] = "round";
                j["condition"] = c;
                j["trial"] = e.trial;
                out << j.dump() << "\n";
            }
            out << json{{"type", "episode"},
                        {"condition", c},
                        {"trial", e.trial},
                        {"env_seed", e.env_seed},
                        {"run_seed", e.run_seed},
                        {"success", e.success},
                        {"failure", to_string(e.failure)},
                        {"ticks", e.ticks},
                        {"stats", stats_to_json(e.stats)}}
                       .dump()
                << "\n";
        }
    }
}

ParsedTrace read_trace(std::istream& in) {
    ParsedTrace t;
    std::string line;
    long lineno = 0;
    bool have_header = false;
    std::vector<RoundRecord> pending;
    int pending_condition = -1;
    int pending_trial = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            const std::string type = j.at("type").get<std::string>();
            if (type == "header") {
                if (have_header) throw std::runtime_error("second header");
                have_header = true;
                t.fingerprint = j.at("fingerprint").get<std::string>();
                t.seed = j.at("seed").get<std::uint64_t>();
                t.trials = j.at("trials").get<int>();
                t.baseline = j.at("baseline").get<std::string>();
                t.baseline_full_ms = j.at("baseline_full_ms").get<double>();
                for (const auto& c : j.at("conditions")) t.infos.push_back(info_from_json(c));
                t.episodes.resize(t.infos.size());
                continue;
            }
            if (!have_header) throw std::runtime_error("record before header");
            const int c = j.at("condition").get<int>();
            const int trial = j.at("trial").get<int>();
            if (c < 0 || static_cast<std::size_t>(c) >= t.infos.size()) {
                throw std::runtime_error("condition index out of range");
            }
            if (!pending.empty() && (c != pending_condition || trial != pending_trial)) {
                throw std::runtime_error("round records interleaved across episodes");
            }
            if (type == "round") {
                pending_condition = c;
                pending_trial = trial;
                pending.push_back(round_from_json(j));
            } else if (type == "episode") {
                EpisodeRun run;
                run.trial = trial;
                run.env_seed = j.at("env_seed").get<std::uint64_t>();
                run.run_seed = j.at("run_seed").get<std::uint64_t>();
                run.success = j.at("success").get<bool>();
                run.failure = parse_failure(j.at("failure").get<std::string>());
                run.ticks = j.at("ticks").get<long>();
                run.stats = stats_from_json(j.at("stats"));
                run.trace = std::move(pending);
                pending.clear();
                t.episodes[static_cast<std::size_t>(c)].push_back(std::move(run));
            } else {
                throw std::runtime_error("unknown record type '" + type + "'");
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("trace line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw std::runtime_error("trace: missing header");
    if (!pending.empty()) throw std::runtime_error("trace: round records without a closing episode record");
    return t;
}

SuiteReport reaggregate(const ParsedTrace& t) {
    return aggregate(t.fingerprint, t.seed, t.trials, t.baseline, t.baseline_full_ms, t.infos, t.episodes);
}

json to_json(const SuiteReport& report) {
    json conditions = json::array();
    for (const auto& c : report.conditions) {
        json episodes = json::array();
        for (const auto& e : c.episodes) {
            json j = stats_to_json(e.stats);
            j["trial"] = e.trial;
            j["env_seed"] = e.env_seed;
            j["run_seed"] = e.run_seed;
            j["failure"] = to_string(e.failure);
            j["ticks"] = e.ticks;
            episodes.push_back(std::move(j));
        }
        json j = info_to_json(c.info);
        j["trials"] = c.trials;
        j["SR"] = c.sr;
        j["Lat_ms"] = c.lat_ms;
        j["per_action_ms"] = c.per_action_ms;
        j["FR"] = c.fr;
        j["Acc"] = c.acc;
        j["speedup"] = c.speedup;
        j["rounds"] = c.rounds;
        j["flash_accepted"] = c.flash_accepted;
        j["executed_actions"] = c.executed_actions;
        j["episodes"] = std::move(episodes);
        conditions.push_back(std::move(j));
    }
    std::vector<std::uint64_t> env_seeds;
    std::vector<std::uint64_t> run_seeds;
    for (int e = 0; e < report.trials; ++e) {
        env_seeds.push_back(episode_env_seed(report.seed, e));
        run_seeds.push_back(episode_run_seed(report.seed, e));
    }
    return {{"fingerprint", report.fingerprint},
            {"code_version", report.code_version},
            {"seed", report.seed},
            {"trials", report.trials},
            {"seeds", {{"env", env_seeds}, {"run", run_seeds}}},
            {"baseline", report.baseline},
            {"baseline_full_ms", report.baseline_full_ms},
            {"conditions", conditions}};
}

SuiteReport report_from_json(const json& j) {
    SuiteReport r;
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.code_version = j.at("code_version").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.trials = j.at("trials").get<int>();
    r.baseline = j.at("baseline").get<std::string>();
    r.baseline_full_ms = j.at("baseline_full_ms").get<double>();
    for (const auto& c : j.at("conditions")) {
        ConditionReport cr;
        cr.info = info_from_json(c);
        cr.trials = c.at("trials").get<int>();
        cr.sr = c.at("SR").get<double>();
        cr.lat_ms = c.at("Lat_ms").get<double>();
        cr.per_action_ms = c.at("per_action_ms").get<double>();
        cr.fr = c.at("FR").get<double>();
        cr.acc = c.at("Acc").get<double>();
        cr.speedup = c.at("speedup").get<double>();
        cr.rounds = c.at("rounds").get<long>();
        cr.flash_accepted = c.at("flash_accepted").get<long>();
        cr.executed_actions = c.at("executed_actions").get<long>();
        for (const auto& e : c.at("episodes")) {
            EpisodeSummary es;
            es.stats = stats_from_json(e);
            es.trial = e.at("trial").get<int>();
            es.env_seed = e.at("env_seed").get<std::uint64_t>();
            es.run_seed = e.at("run_seed").get<std::uint64_t>();
            es.failure = parse_failure(e.at("failure").get<std::string>());
            es.ticks = e.at("ticks").get<long>();
            cr.episodes.push_back(std::move(es));
        }
        r.conditions.push_back(std::move(cr));
    }
    return r;
}

// --- CSV -------------------------------------------------------------------------

const std::vector<std::string> kCsvColumns{
    "condition", "method", "speed",  "variant", "delta",         "timesteps", "pf", "fb",
    "trials",    "SR",     "Lat_ms", "per_action_ms", "FR",      "Acc",       "speedup"};

void write_csv(std::ostream& out, const SuiteReport& report) {
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) out << (i ? "," : "") << kCsvColumns[i];
    out << "\n";
    for (const auto& c : report.conditions) {
        const ConditionInfo& i = c.info;
        out << i.label << "," << i.method.label() << "," << i.speed << "," << i.variant << ","
            << fmt(i.delta) << "," << i.timesteps << "," << i.pf << "," << (i.fb ? 1 : 0) << "," << c.trials
            << "," << fmt(c.sr) << "," << fmt(c.lat_ms) << "," << fmt(c.per_action_ms) << "," << fmt(c.fr)
            << "," << fmt(c.acc) << "," << fmt(c.speedup) << "\n";
    }
}

ReportFiles emit_report(const SuiteReport& report, const std::vector<ConditionRuns>& runs,
                        const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    ReportFiles f{dir / "report.csv", dir / "report.json", dir / "trace.jsonl"};
    auto open = [](const std::filesystem::path& p) {
        std::ofstream os(p, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        return os;
    };
    {
        std::ofstream os = open(f.csv);
        write_csv(os, report);
    }
    {
        std::ofstream os = open(f.json);
        os << to_json(report).dump(2) << "\n";
    }
    {
        std::ofstream os = open(f.trace);
        write_trace(os, report, runs);
    }
    return f;
}

// --- checks ------------------------------------------------------------------------

std::vector<std::string> compare_reports(const SuiteReport& a, const SuiteReport& b, double tol) {
    std::vector<std::string> out;
    auto num = [&](const std::string& what, double x, double y) {
        if (!(std::abs(x - y) <= tol) && !(x == y)) out.push_back(what + ": " + fmt(x) + " vs " + fmt(y));
    };
    if (a.fingerprint != b.fingerprint) out.push_back("fingerprint differs");
    if (a.seed != b.seed) out.push_back("seed differs");
    if (a.trials != b.trials) out.push_back("trials differ");
    if (a.baseline != b.baseline) out.push_back("baseline differs");
    if (a.conditions.size() != b.conditions.size()) {
        out.push_back("condition count differs");
        return out;
    }
    for (std::size_t c = 0; c < a.conditions.size(); ++c) {
        const auto& x = a.conditions[c];
        const auto& y = b.conditions[c];
        const std::string p = x.info.label + ": ";
        if (x.info.label != y.info.label) out.push_back(p + "label differs");
        if (x.trials != y.trials) out.push_back(p + "trials differ");
        num(p + "SR", x.sr, y.sr);
        num(p + "Lat_ms", x.lat_ms, y.lat_ms);
        num(p + "per_action_ms", x.per_action_ms, y.per_action_ms);
        num(p + "FR", x.fr, y.fr);
        num(p + "Acc", x.acc, y.acc);
        num(p + "speedup", x.speedup, y.speedup);
        if (x.rounds != y.rounds || x.flash_accepted != y.flash_accepted ||
            x.executed_actions != y.executed_actions) {
            out.push_back(p + "round counts differ");
        }
        if (x.episodes.size() != y.episodes.size()) {
            out.push_back(p + "episode count differs");
            continue;
        }
        for (std::size_t e = 0; e < x.episodes.size(); ++e) {
            const auto& s = x.episodes[e].stats;
            const auto& t = y.episodes[e].stats;
            const std::string q = p + "trial " + std::to_string(x.episodes[e].trial) + " ";
            if (s.success != t.success || s.rounds != t.rounds || s.flash_accepted != t.flash_accepted ||
                s.executed_actions != t.executed_actions) {
                out.push_back(q + "counts differ");
            }
            num(q + "FR", s.flash_rate, t.flash_rate);
            num(q + "Acc", s.acc, t.acc);
            num(q + "Lat_ms", s.latency_ms, t.latency_ms);
            num(q + "per_action_ms", s.per_action_ms, t.per_action_ms);
        }
    }
    return out;
}

std::vector<std::string> audit_trace(const ParsedTrace& trace) {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < trace.infos.size(); ++c) {
        const ConditionInfo& info = trace.infos[c];
        LatencyCoupling lc;
        lc.control_tick_ms = info.tick_ms;
        const bool flash_mode = info.method.mode == RunMode::flash;
        for (const auto& run : trace.episodes[c]) {
            const std::string where = info.label + " trial " + std::to_string(run.trial);
            auto fail = [&](int round, const std::string& what) {
                out.push_back(where + " round " + std::to_string(round) + ": " + what);
            };
            if (!same_stats(stats_from_trace(run.trace, info.replan, run.success), run.stats)) {
                out.push_back(where + ": reported stats differ from the trace fold");
            }
            if (run.trace.empty()) {
                out.push_back(where + ": empty trace");
                continue;
            }
            int last_full = -1;
            int run_of_accepted = 0;
            long prev_tick = -1;
            for (std::size_t k = 0; k < run.trace.size(); ++k) {
                const RoundRecord& r = run.trace[k];
                const int n = r.round;
                if (n != static_cast<int>(k)) fail(n, "round index out of sequence");
                if (r.tick < prev_tick) fail(n, "tick went backwards");
                prev_tick = r.tick;
                if (k == 0 && r.path != RoundKind::full) fail(n, "first round is not a full round");
                if (!flash_mode && r.path != RoundKind::full) fail(n, "full_only run took another path");
                if (r.executed_prefix < 0) fail(n, "negative executed prefix");
                if (info.cap_prefix && r.executed_prefix > info.replan) fail(n, "executed prefix exceeds R");
                if (r.verifier.has_value() != is_flash_path(r.path)) fail(n, "verifier summary presence");

                double want_ms = info.full_ms;
                int want_stall = stall_ticks(info.full_ms, lc);
                if (r.path == RoundKind::flash_accepted) {
                    want_ms = info.flash_ms;
                    want_stall = stall_ticks(info.flash_ms, lc);
                } else if (is_flash_path(r.path) && info.additive_fallback) {
                    want_ms = info.flash_ms + info.full_ms;
                    want_stall = stall_ticks(info.flash_ms, lc) + stall_ticks(info.full_ms, lc);
                }
                if (r.latency_ms != want_ms) fail(n, "latency does not match the path cost");
                if (r.stall_ticks != want_stall) fail(n, "stall ticks do not match the latency");

                if (is_flash_path(r.path)) {
                    if (r.cache_round != last_full) fail(n, "cache does not come from the last full round");
                    if (r.path == RoundKind::flash_accepted) {
                        if (r.verifier->prefix < 1) fail(n, "accepted with an empty prefix");
                        if (r.executed_prefix > r.verifier->prefix) fail(n, "executed past the accepted prefix");
                        if (info.fb && r.verifier->gripper_switch) fail(n, "accepted despite a gripper switch");
                    }
                    if (r.path == RoundKind::flash_phase_fallback && !r.verifier->gripper_switch) {
                        fail(n, "phase fallback without a detected switch");
                    }
                    if (r.path == RoundKind::flash_rejected_fallback && r.verifier->prefix > 0) {
                        fail(n, "rejected a non-empty prefix");
                    }
                } else if (r.cache_round != -1) {
                    fail(n, "full round records a cache provenance");
                }

                if (r.path == RoundKind::flash_accepted) {
                    ++run_of_accepted;
                    if (info.pf > 0 && run_of_accepted > info.pf) fail(n, "more flash rounds than PF allows");
                } else {
                    if (r.path == RoundKind::periodic_refresh &&
                        (info.pf == 0 || run_of_accepted != info.pf)) {
                        fail(n, "periodic refresh at the wrong time");
                    }
                    run_of_accepted = 0;
                    last_full = n;
                }
            }
        }
    }
    return out;
}

// --- entry point ---------------------------------------------------------------------

BenchOutcome run_benchmark(const Config& cfg, std::uint64_t seed, std::ostream* log) {
    cfg.validate();
    const std::vector<Condition> conditions = grid_conditions(cfg);
    PolicyModels models = obtain_models(cfg, cfg.bench.train_missing, log);
    if (log) {
        *log << "bench: " << conditions.size() << " conditions x " << cfg.bench.trials << " trials, grid "
             << to_string(cfg.bench.grid) << "\n";
    }
    const auto runs = run_conditions(cfg, models, conditions, cfg.bench.trials, seed, cfg.bench.threads);
    BenchOutcome outcome;
    outcome.report = make_report(cfg, runs, cfg.bench.trials, seed);
    outcome.files = emit_report(outcome.report, runs, cfg.out_dir);

    std::ifstream in(outcome.files.trace, std::ios::binary);
    const ParsedTrace parsed = read_trace(in);
    const auto diffs = compare_reports(outcome.report, reaggregate(parsed));
    if (!diffs.empty()) throw std::runtime_error("bench: report differs from trace re-aggregation: " + diffs.front());
    const auto violations = audit_trace(parsed);
    if (!violations.empty()) throw std::runtime_error("bench: trace audit failed: " + violations.front());
    return outcome;
}

}  // namespace specflow
