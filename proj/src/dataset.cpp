#include "specflow/dataset.hpp"

#include <iostream>
#include <random>
#include <stdexcept>

#include "specflow/rng.hpp"

namespace specflow {

void DatasetConfig::validate() const {
    if (episodes < 1) throw std::invalid_argument("dataset: episodes must be positive");
    if (horizon < 1 || replan < 1 || replan > horizon) {
        throw std::invalid_argument("dataset: need 1 <= replan <= horizon");
    }
    if (stride < 1) throw std::invalid_argument("dataset: stride must be positive");
    if (!(action_noise >= 0.0) || !(noise_correlation >= 0.0 && noise_correlation < 1.0)) {
        throw std::invalid_argument("dataset: need action_noise >= 0 and noise_correlation in [0, 1)");
    }
    if (!(speed_jitter >= 0.0 && speed_jitter < 1.0)) {
        throw std::invalid_argument("dataset: speed_jitter must be in [0, 1)");
    }
}

namespace {

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) != b(i)) return false;
    }
    return true;
}

}  // namespace

Demonstration record_demonstration(const ConveyorConfig& cfg, double belt_speed, int variant,
                                   std::uint64_t seed, ExecutionNoise noise) {
    ConveyorEnv env(cfg, belt_speed, variant, seed);
    Rng rng = make_stream(seed, Stream::demonstration);
    std::normal_distribution<double> normal(0.0, 1.0);
    Demonstration demo;
    demo.seed = seed;
    demo.belt_speed = belt_speed;
    demo.variant = variant;
    std::vector<Eigen::VectorXd> labels;
    std::vector<Eigen::VectorXd> executed;
    Eigen::Vector2d offset = Eigen::Vector2d::Zero();
    while (!env.state().terminal()) {
        demo.observations.push_back(env.observe());
        labels.push_back(expert_action(env.state(), cfg));
        Eigen::VectorXd a = labels.back();
        if (noise.scale > 0.0) {
            const Eigen::Vector2d kick(normal(rng), normal(rng));
            offset = noise.correlation * offset + noise.scale * kick;
            if (env.state().phase == Phase::transport) a.head<2>() += offset;
        }
        executed.push_back(a);
        env.step(a);
    }
    const auto rows = static_cast<Eigen::Index>(labels.size());
    demo.actions.resize(rows, 3);
    demo.executed.resize(rows, 3);
    for (Eigen::Index t = 0; t < rows; ++t) {
        demo.actions.row(t) = labels[static_cast<std::size_t>(t)].transpose();
        demo.executed.row(t) = executed[static_cast<std::size_t>(t)].transpose();
    }
    demo.success = env.state().outcome == Outcome::success;
    return demo;
}

bool replay_matches(const ConveyorConfig& cfg, const Demonstration& demo) {
    ConveyorEnv env(cfg, demo.belt_speed, demo.variant, demo.seed);
    for (int t = 0; t < demo.length(); ++t) {
        const Observation obs = env.observe();
        const Observation& rec = demo.observations[static_cast<std::size_t>(t)];
        if (!same_bits(obs.world_features, rec.world_features) ||
            !same_bits(obs.robot_state, rec.robot_state) || obs.task_id != rec.task_id) {
            return false;
        }
        if (env.state().terminal()) return false;
        env.step(demo.executed.row(t).transpose());
    }
    return env.state().terminal() && (env.state().outcome == Outcome::success) == demo.success;
}

bool holding_object(const Observation& obs) {
    return obs.robot_state(2) > 0.0 && obs.world_features(0) == obs.robot_state(0) &&
           obs.world_features(1) == obs.robot_state(1);
}

std::vector<FlowSample> chunk_demonstration(const Demonstration& demo, int horizon, int stride,
                                            int replan, const Standardizer& actions,
                                            bool stale_augment) {
    if (horizon < 1 || stride < 1 || replan < 1) throw std::invalid_argument("chunk_demonstration: bad sizes");
    const Eigen::RowVectorXd last = demo.actions.row(demo.length() - 1);
    const Eigen::VectorXd rest = rest_action(Eigen::Vector2d(last(0), last(1)));
    // Regular grid plus every step where the gripper command flips.
    std::vector<int> starts;
    for (int t = 0; t < demo.length(); ++t) {
        const bool flips = t > 0 && (demo.actions(t, 2) > 0.0) != (demo.actions(t - 1, 2) > 0.0);
        if (t % stride == 0 || flips) starts.push_back(t);
    }
    std::vector<FlowSample> out;
    for (int t : starts) {
        Eigen::MatrixXd raw(horizon, 3);
        Eigen::VectorXd mask = Eigen::VectorXd::Zero(horizon);
        for (int h = 0; h < horizon; ++h) {
            if (t + h < demo.length()) {
                raw.row(h) = demo.actions.row(t + h);
                mask(h) = 1.0;
            } else {
                raw.row(h) = rest.transpose();
            }
        }
        FlowSample s;
        s.obs = demo.observations[static_cast<std::size_t>(t)];
        s.target = standardize(ActionChunk(raw, conveyor_layout(), ActionSpace::raw), actions).values();
        s.mask = std::move(mask);
        if (stale_augment && holding_object(s.obs)) {
            for (int age : {replan, 2 * replan}) {
                if (t - age < 0) continue;
                FlowSample stale = s;
                stale.obs.world_features =
                    demo.observations[static_cast<std::size_t>(t - age)].world_features;
                out.push_back(std::move(stale));
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

Dataset generate_dataset(const ConveyorConfig& env, const DatasetConfig& cfg, std::uint64_t seed) {
    env.validate();
    cfg.validate();
    const double base = env.speeds.units_per_tick(cfg.speed);
    Dataset ds;
    for (int e = 0; e < cfg.episodes; ++e) {
        const std::uint64_t ep_seed = mix_seed(seed, 0x64656d6fULL, static_cast<std::uint64_t>(e));
        Rng rng(ep_seed);
        const double speed = base * (1.0 + uniform(rng, -cfg.speed_jitter, cfg.speed_jitter));
        const int variant = e % static_cast<int>(env.variants.size());
        Demonstration demo = record_demonstration(env, speed, variant, ep_seed,
                                                  {cfg.action_noise, cfg.noise_correlation});
        if (!demo.success) {
            std::cerr << "dataset: excluding failed expert episode " << e << "\n";
            ds.excluded_seeds.push_back(ep_seed);
            continue;
        }
        ds.demos.push_back(std::move(demo));
    }
    if (ds.demos.empty()) throw std::runtime_error("dataset: every expert episode failed");

    Eigen::Index total = 0;
    for (const auto& d : ds.demos) total += d.actions.rows();
    Eigen::MatrixXd all(total, 3);
    Eigen::Index row = 0;
    for (const auto& d : ds.demos) {
        all.middleRows(row, d.actions.rows()) = d.actions;
        row += d.actions.rows();
    }
    ds.actions = Standardizer::fit(all);
    for (const auto& d : ds.demos) {
        auto pairs = chunk_demonstration(d, cfg.horizon, cfg.stride, cfg.replan, ds.actions,
                                         cfg.stale_augment);
        for (auto& p : pairs) ds.pairs.push_back(std::move(p));
    }
    return ds;
}

}  // namespace specflow
