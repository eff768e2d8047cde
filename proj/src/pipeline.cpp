#include "specflow/pipeline.hpp"

#include <chrono>
#include <ostream>

#include <json.hpp>

#include "specflow/checkpoint.hpp"

namespace specflow {

using nlohmann::json;

namespace {

constexpr const char* kDatasetKind = "specflow.dataset";

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    Checkpoint ckpt;
    Eigen::Index rows = 0;
    for (const auto& d : ds.demos) rows += d.length();
    Eigen::MatrixXd world(rows, ConveyorEnv::kWorldDims);
    Eigen::MatrixXd state(rows, ConveyorEnv::kStateDims);
    Eigen::VectorXd task(rows);
    Eigen::MatrixXd actions(rows, 3);
    Eigen::MatrixXd executed(rows, 3);
    json episodes = json::array();
    Eigen::Index r = 0;
    for (const auto& d : ds.demos) {
        episodes.push_back({{"seed", d.seed},
                            {"belt_speed", d.belt_speed},
                            {"variant", d.variant},
                            {"length", d.length()},
                            {"success", d.success}});
        for (int t = 0; t < d.length(); ++t, ++r) {
            const Observation& o = d.observations[static_cast<std::size_t>(t)];
            world.row(r) = o.world_features.transpose();
            state.row(r) = o.robot_state.transpose();
            task(r) = o.task_id;
        }
        actions.middleRows(r - d.length(), d.length()) = d.actions;
        executed.middleRows(r - d.length(), d.length()) = d.executed;
    }
    ckpt.put("world", world);
    ckpt.put("state", state);
    ckpt.put("task", task);
    ckpt.put("actions", actions);
    ckpt.put("executed", executed);
    ckpt.put("scaler.actions.mean", ds.actions.mean());
    ckpt.put("scaler.actions.std", ds.actions.std());
    ckpt.meta_json = json{{"kind", kDatasetKind},
                          {"episodes", episodes},
                          {"excluded_seeds", ds.excluded_seeds}}
                         .dump();
    save_checkpoint(ckpt, path);
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetConfig& cfg) {
    const Checkpoint ckpt = load_checkpoint(path);
    Dataset ds;
    try {
        const json meta = json::parse(ckpt.meta_json);
        if (meta.value("kind", "") != kDatasetKind) {
            throw CheckpointError("dataset: " + path.string() + " is not a dataset file");
        }
        const Eigen::MatrixXd world = ckpt.matrix("world");
        const Eigen::MatrixXd state = ckpt.matrix("state");
        const Eigen::VectorXd task = ckpt.vector("task");
        const Eigen::MatrixXd actions = ckpt.matrix("actions");
        const Eigen::MatrixXd executed = ckpt.matrix("executed");
        Eigen::Index r = 0;
        for (const auto& e : meta.at("episodes")) {
            Demonstration d;
            d.seed = e.at("seed").get<std::uint64_t>();
            d.belt_speed = e.at("belt_speed").get<double>();
            d.variant = e.at("variant").get<int>();
            d.success = e.at("success").get<bool>();
            const int len = e.at("length").get<int>();
            if (len < 1 || r + len > world.rows()) throw CheckpointError("dataset: episode table overruns arrays");
            for (int t = 0; t < len; ++t) {
                Observation o;
                o.world_features = world.row(r + t).transpose();
                o.robot_state = state.row(r + t).transpose();
                o.task_id = static_cast<int>(task(r + t));
                d.observations.push_back(std::move(o));
            }
            d.actions = actions.middleRows(r, len);
            d.executed = executed.middleRows(r, len);
            r += len;
            ds.demos.push_back(std::move(d));
        }
        if (r != world.rows()) throw CheckpointError("dataset: trailing rows after the last episode");
        ds.excluded_seeds = meta.at("excluded_seeds").get<std::vector<std::uint64_t>>();
        ds.actions = Standardizer(ckpt.vector("scaler.actions.mean"), ckpt.vector("scaler.actions.std"));
    } catch (const json::exception& e) {
        throw CheckpointError("dataset: malformed metadata in " + path.string() + ": " + e.what());
    }
    cfg.validate();
    for (const auto& d : ds.demos) {
        auto pairs = chunk_demonstration(d, cfg.horizon, cfg.stride, cfg.replan, ds.actions,
                                         cfg.stale_augment);
        for (auto& p : pairs) ds.pairs.push_back(std::move(p));
    }
    return ds;
}

ArtifactPaths ArtifactPaths::in(const std::filesystem::path& dir) {
    return {dir / "dataset.ckpt", dir / "main.ckpt", dir / "models.ckpt"};
}

MainTraining train_main_policy(const Config& cfg, const Dataset& ds) {
    Rng rng = make_stream(cfg.main.seed, Stream::training, 0);
    FlowPolicy policy(cfg.shape(), cfg.policy.arch, rng);
    policy.set_scalers(fit_feature_scalers(ds.pairs));
    std::vector<double> losses = train_flow(policy, ds.pairs, cfg.main.train, rng);
    return {std::move(policy), std::move(losses)};
}

DraftTraining train_draft_model(const Config& cfg, const FlowPolicy& main, const Dataset& ds) {
    Rng rng = make_stream(cfg.draft.seed, Stream::training, 1);
    std::vector<DraftSample> samples =
        cfg.draft.train.target_source == TargetSource::teacher
            ? teacher_targets(main, ds.pairs, cfg.runtime.denoise, cfg.draft.teacher_seed)
            : demo_targets(ds.pairs);
    DraftModel draft(cfg.shape(), main.scalers(), cfg.draft.hidden, rng);
    check_draft_budget(draft, main, cfg.runtime.denoise.num_steps);
    DraftTrainResult result = train_draft(draft, samples, cfg.draft.train, rng);
    return {std::move(draft), std::move(result)};
}

std::string training_meta(const Config& cfg) {
    json config = to_json(cfg);
    config.erase("io");
    return json{{"config", config},
                {"fingerprint", config_fingerprint(cfg)},
                {"seeds",
                 {{"dataset", cfg.dataset_seed},
                  {"main", cfg.main.seed},
                  {"draft", cfg.draft.seed},
                  {"teacher", cfg.draft.teacher_seed}}}}
        .dump();
}

PolicyModels train_all(const Config& cfg, std::ostream* log) {
    auto t0 = std::chrono::steady_clock::now();
    Dataset ds = generate_dataset(cfg.env, cfg.dataset, cfg.dataset_seed);
    if (log) {
        *log << "dataset: " << ds.demos.size() << " demonstrations, " << ds.pairs.size()
             << " pairs (" << seconds_since(t0) << " s)\n";
    }
    t0 = std::chrono::steady_clock::now();
    MainTraining main = train_main_policy(cfg, ds);
    if (log) {
        *log << "main policy: loss " << main.epoch_losses.front() << " -> " << main.epoch_losses.back()
             << " (" << seconds_since(t0) << " s)\n";
    }
    t0 = std::chrono::steady_clock::now();
    DraftTraining draft = train_draft_model(cfg, main.policy, ds);
    if (log) {
        *log << "draft: best validation rms " << draft.result.best_validation_rms << " (" << seconds_since(t0)
             << " s)\n";
    }
    return PolicyModels{std::move(main.policy), std::move(draft.draft), ds.actions};
}

PolicyModels obtain_models(const Config& cfg, bool train_missing, std::ostream* log) {
    const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
    if (std::filesystem::exists(paths.models)) return unpack_models(load_checkpoint(paths.models));
    if (!train_missing) {
        throw CheckpointError("missing checkpoint " + paths.models.string() +
                              " (run train-main and train-draft first)");
    }
    PolicyModels models = train_all(cfg, log);
    std::filesystem::create_directories(cfg.out_dir);
    save_checkpoint(pack_models(models, training_meta(cfg)), paths.models);
    return models;
}

std::vector<DiagnosticState> sample_diagnostic_states(const Config& cfg, const PolicyModels& models,
                                                      int count, std::uint64_t seed) {
    if (!models.draft) throw std::invalid_argument("sample_diagnostic_states: no draft model");
    const int lag = cfg.runtime.replan + stall_ticks(round_cost(cfg.profile("torch"), RoundPath::full), cfg.coupling);
    const double speed = cfg.env.speeds.units_per_tick(cfg.dataset.speed);
    const int variant = cfg.env.variant_index(cfg.default_variant);
    std::vector<DiagnosticState> out;
    for (int e = 0; static_cast<int>(out.size()) < count; ++e) {
        if (e > 100 * count + 100) throw std::runtime_error("sample_diagnostic_states: rollouts too short");
        const std::uint64_t ep_seed = mix_seed(seed, static_cast<std::uint64_t>(Stream::diagnostics), e);
        ConveyorEnv env(cfg.env, speed, variant, ep_seed);
        std::vector<Observation> seen;
        while (!env.state().terminal()) {
            seen.push_back(env.observe());
            env.step(expert_action(env.state(), cfg.env));
        }
        Rng rng(ep_seed);
        const int n = static_cast<int>(seen.size());
        if (n <= lag) continue;
        std::uniform_int_distribution<int> pick(0, n - lag - 1);
        for (int k = 0; k < 4 && static_cast<int>(out.size()) < count; ++k) {
            const int t = pick(rng);
            const Observation& fresh = seen[static_cast<std::size_t>(t + lag)];
            out.push_back({seen[static_cast<std::size_t>(t)], fresh, models.draft->propose(fresh)});
        }
    }
    return out;
}

}  // namespace specflow
