// specflow command-line front end. Exit codes: 0 ok, 1 usage/config error,
// 2 runtime failure.
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "specflow/bench.hpp"
#include "specflow/checkpoint.hpp"
#include "specflow/config.hpp"
#include "specflow/oracle.hpp"
#include "specflow/pipeline.hpp"

using namespace specflow;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> profile;
    std::optional<std::string> speed;
    std::optional<std::string> variant;
    std::optional<std::string> grid;
    std::optional<double> delta;
    std::optional<int> timesteps;
    std::optional<int> pf;
    std::optional<bool> fb;
    std::optional<int> trials;
    std::optional<int> threads;
    std::string trace;
    int diagnostic_states = 200;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Config resolve_unchecked(const Options& o) {
    Config cfg = o.config.empty() ? Config::defaults() : load_config(o.config);
    if (o.out_dir) cfg.out_dir = *o.out_dir;
    if (o.delta) cfg.runtime.verifier.delta = *o.delta;
    if (o.timesteps) {
        if (*o.timesteps < 1) throw ConfigError("config: --timesteps must be >= 1");
        cfg.runtime.verifier.timesteps = evenly_spaced_timesteps(*o.timesteps);
    }
    if (o.pf) cfg.runtime.periodic_refresh = *o.pf;
    if (o.fb) cfg.runtime.phase_fallback = *o.fb;
    if (o.trials) cfg.bench.trials = *o.trials;
    if (o.threads) cfg.bench.threads = *o.threads;
    if (o.variant) cfg.default_variant = *o.variant;
    if (o.grid) cfg.bench.grid = parse_grid(*o.grid);
    if (o.speed) cfg.bench.speeds = {*o.speed};
    if (o.profile) {
        cfg.profile(*o.profile);
        std::vector<MethodSpec> kept;
        for (const auto& m : cfg.bench.methods) {
            if (m.profile == *o.profile) kept.push_back(m);
        }
        if (kept.empty()) {
            const RunMode mode = cfg.profile(*o.profile).flash ? RunMode::flash : RunMode::full_only;
            kept.push_back({mode, *o.profile});
        }
        cfg.bench.methods = kept;
    }
    cfg.validate();
    return cfg;
}

Config resolve(const Options& o) {
    try {
        return resolve_unchecked(o);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::uint64_t required_seed(const Options& o, const std::string& cmd) {
    if (!o.seed) throw UsageError(cmd + ": --seed is required");
    return *o.seed;
}

int gen_data(const Options& o) {
    Config cfg = resolve(o);
    if (o.seed) cfg.dataset_seed = *o.seed;
    const Dataset ds = generate_dataset(cfg.env, cfg.dataset, cfg.dataset_seed);
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = ArtifactPaths::in(cfg.out_dir).dataset;
    save_dataset(ds, path);
    std::cout << "wrote " << path.string() << ": " << ds.demos.size() << " demonstrations, " << ds.pairs.size()
              << " training pairs, " << ds.excluded_seeds.size() << " excluded\n";
    return 0;
}

int train_main(const Options& o) {
    Config cfg = resolve(o);
    if (o.seed) cfg.main.seed = *o.seed;
    const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
    const Dataset ds = load_dataset(paths.dataset, cfg.dataset);
    MainTraining t = train_main_policy(cfg, ds);
    json meta = json::parse(training_meta(cfg));
    meta["epoch_losses"] = t.epoch_losses;
    save_checkpoint(pack_models(PolicyModels{std::move(t.policy), std::nullopt, ds.actions}, meta.dump()),
                    paths.main);
    std::cout << "wrote " << paths.main.string() << ": loss " << t.epoch_losses.front() << " -> "
              << t.epoch_losses.back() << "\n";
    return 0;
}

int train_draft(const Options& o) {
    Config cfg = resolve(o);
    if (o.seed) cfg.draft.seed = *o.seed;
    const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
    const Dataset ds = load_dataset(paths.dataset, cfg.dataset);
    PolicyModels models = unpack_models(load_checkpoint(paths.main));
    DraftTraining t = train_draft_model(cfg, models.main, ds);
    std::cout << "draft: " << t.draft.net().parameter_count() << " parameters vs " << models.main.parameter_count()
              << " in the main policy, best validation rms " << t.result.best_validation_rms << " at epoch "
              << t.result.best_epoch << "\n";
    json meta = json::parse(training_meta(cfg));
    meta["draft_validation_rms"] = t.result.validation_rms;
    models.draft = std::move(t.draft);
    save_checkpoint(pack_models(models, meta.dump()), paths.models);
    std::cout << "wrote " << paths.models.string() << "\n";
    return 0;
}

int run(const Options& o) {
    const std::uint64_t seed = required_seed(o, "run");
    const Config cfg = resolve(o);
    const std::string profile_name = o.profile.value_or(cfg.bench.methods.back().profile);
    const RunMode mode = cfg.profile(profile_name).flash ? RunMode::flash : RunMode::full_only;
    const std::string speed = o.speed.value_or(cfg.dataset.speed);
    const Condition cond = make_condition(cfg, {mode, profile_name}, speed, cfg.default_variant);
    const PolicyModels models = obtain_models(cfg, false, nullptr);

    const auto runs = run_conditions(cfg, models, {cond}, 1, seed, 1);
    const EpisodeRun& ep = runs.front().episodes.front();
    for (const auto& r : ep.trace) {
        std::cout << "round " << r.round << " tick " << r.tick << " " << to_string(r.phase) << " "
                  << to_string(r.path) << " exec=" << r.executed_prefix << " lat=" << r.latency_ms << "ms";
        if (r.verifier) {
            std::cout << " L=" << r.verifier->prefix << " switch=" << r.verifier->gripper_switch
                      << " cache=" << r.cache_round;
        }
        std::cout << "\n";
    }
    const EpisodeStats& s = ep.stats;
    std::cout << cond.label() << ": " << (s.success ? "success" : "failure (" + to_string(ep.failure) + ")")
              << " after " << ep.ticks << " ticks, rounds=" << s.rounds << " FR=" << s.flash_rate
              << " Acc=" << s.acc << " Lat=" << s.latency_ms << "ms per_action=" << s.per_action_ms << "ms\n";

    std::filesystem::create_directories(cfg.out_dir);
    const auto path = cfg.out_dir / "run_trace.jsonl";
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_trace(os, make_report(cfg, runs, 1, seed), runs);
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int bench(const Options& o) {
    const std::uint64_t seed = required_seed(o, "bench");
    const Config cfg = resolve(o);
    const BenchOutcome out = run_benchmark(cfg, seed, &std::cerr);
    write_csv(std::cout, out.report);
    std::cerr << "wrote " << out.files.csv.string() << ", " << out.files.json.string() << ", "
              << out.files.trace.string() << "\n";
    return 0;
}

int report(const Options& o) {
    const Config cfg = resolve(o);
    const std::filesystem::path trace_path = o.trace.empty() ? cfg.out_dir / "trace.jsonl" : std::filesystem::path(o.trace);
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + trace_path.string());
    const ParsedTrace parsed = read_trace(in);
    const SuiteReport rep = reaggregate(parsed);
    int status = 0;
    for (const auto& v : audit_trace(parsed)) {
        std::cerr << "audit: " << v << "\n";
        status = 2;
    }
    const auto json_path = trace_path.parent_path() / "report.json";
    if (std::filesystem::exists(json_path)) {
        std::ifstream js(json_path);
        const SuiteReport stored = report_from_json(json::parse(js));
        for (const auto& d : compare_reports(stored, rep)) {
            std::cerr << "mismatch: " << d << "\n";
            status = 2;
        }
        if (status == 0) std::cerr << "report.json matches the re-aggregated trace\n";
    }
    write_csv(std::cout, rep);
    return status;
}

int selftest(const Options& o) {
    int failed = 0;
    for (const auto& c : run_selftest(o.seed.value_or(0))) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        failed += c.passed ? 0 : 1;
    }
    return failed == 0 ? 0 : 2;
}

int diagnose(const Options& o) {
    const std::uint64_t seed = o.seed.value_or(0);
    const Config cfg = resolve(o);
    const PolicyModels models = obtain_models(cfg, false, nullptr);
    const auto states = sample_diagnostic_states(cfg, models, o.diagnostic_states, seed);
    const FlowPolicy& main = models.main;
    const ErrorDecomposition d = measure_error_decomposition(
        main, [&](const Observation& obs) { return main.encode_context(obs); }, states, cfg.runtime.verifier,
        cfg.runtime.denoise, seed);
    std::cout << to_json(d).dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"specflow: speculative flow-matching action policies on a conveyor simulator"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON config file (defaults built in)");
        sub->add_option("--out-dir", o.out_dir, "Directory for artifacts and reports");
        sub->add_option("--seed", o.seed, "Seed");
    };
    auto runtime_flags = [&](CLI::App* sub) {
        sub->add_option("--profile", o.profile, "Cost profile (torch, triton, flash, flash_triton)");
        sub->add_option("--speed", o.speed, "Belt speed name (demo, medium, high, extra_high)");
        sub->add_option("--variant", o.variant, "Object variant");
        sub->add_option("--delta", o.delta, "Verifier threshold");
        sub->add_option("--timesteps", o.timesteps, "Number of verification timesteps K");
        sub->add_option("--pf", o.pf, "Periodic refresh interval, 0 = off");
        sub->add_option("--fb", o.fb, "Phase-aware fallback (true/false)");
    };

    auto* gen = app.add_subcommand("gen-data", "Record expert demonstrations");
    common(gen);
    auto* tmain = app.add_subcommand("train-main", "Train the main flow policy");
    common(tmain);
    auto* tdraft = app.add_subcommand("train-draft", "Train the draft model against the main policy");
    common(tdraft);
    auto* runc = app.add_subcommand("run", "Run one episode and print its round trace");
    common(runc);
    runtime_flags(runc);
    auto* benchc = app.add_subcommand("bench", "Run a benchmark grid and write reports");
    common(benchc);
    runtime_flags(benchc);
    benchc->add_option("--trials", o.trials, "Trials per condition");
    benchc->add_option("--threads", o.threads, "Worker threads");
    benchc->add_option("--grid", o.grid, "main, verifier, components or single");
    auto* reportc = app.add_subcommand("report", "Re-aggregate a trace and check it against report.json");
    common(reportc);
    reportc->add_option("--trace", o.trace, "Trace file (default <out-dir>/trace.jsonl)");
    auto* self = app.add_subcommand("verify-selftest", "Oracle-field and brute-force checks");
    self->add_option("--seed", o.seed, "Seed");
    auto* showc = app.add_subcommand("config", "Print the resolved config as JSON");
    common(showc);
    runtime_flags(showc);
    auto* diag = app.add_subcommand("diagnose", "Error decomposition of the verifier on sampled states");
    common(diag);
    runtime_flags(diag);
    diag->add_option("--states", o.diagnostic_states, "Number of sampled states");

    if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
        std::cerr << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
        return 1;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*gen) return gen_data(o);
        if (*tmain) return train_main(o);
        if (*tdraft) return train_draft(o);
        if (*runc) return run(o);
        if (*benchc) return bench(o);
        if (*reportc) return report(o);
        if (*self) return selftest(o);
        if (*diag) return diagnose(o);
        if (*showc) {
            std::cout << to_json(resolve(o)).dump(2) << "\n";
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
