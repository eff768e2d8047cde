#pragma once

// Small shared builders for unit tests.

#include <vector>

#include "specflow/conveyor.hpp"
#include "specflow/draft.hpp"
#include "specflow/flow_policy.hpp"
#include "specflow/runtime.hpp"

namespace fixtures {

using namespace specflow;

inline PolicyShape tiny_shape(int horizon = 4) {
    PolicyShape s;
    s.horizon = horizon;
    s.layout = ChannelLayout{2, 0};
    s.world_dims = 5;
    s.state_dims = 3;
    s.num_tasks = 2;
    s.embedding_dims = 4;
    return s;
}

inline Observation random_obs(Rng& rng, int task = 0) {
    Observation o;
    o.world_features = gaussian_matrix(5, 1, rng).col(0);
    o.robot_state = gaussian_matrix(3, 1, rng).col(0);
    o.task_id = task;
    return o;
}

inline std::vector<FlowSample> random_samples(const PolicyShape& shape, int count, Rng& rng) {
    std::vector<FlowSample> out;
    for (int i = 0; i < count; ++i) {
        FlowSample s;
        s.obs = random_obs(rng, i % shape.num_tasks);
        s.target = gaussian_matrix(shape.horizon, shape.layout.dims(), rng);
        s.mask = Eigen::VectorXd::Ones(shape.horizon);
        if (i % 3 == 0) s.mask(shape.horizon - 1) = 0.0;
        out.push_back(std::move(s));
    }
    return out;
}

// Untrained models sized for the conveyor task; episodes mostly time out,
// which is fine for accounting tests.
inline PolicyModels conveyor_models(std::uint64_t seed, int horizon = 50) {
    Rng rng(seed);
    const PolicyShape shape = conveyor_policy_shape(ConveyorConfig{}, horizon, 8);
    FlowPolicy::Architecture arch;
    arch.encoder_hidden = {8};
    arch.field_hidden = {16};
    FlowPolicy main(shape, arch, rng);
    DraftModel draft(shape, main.scalers(), {8}, rng);
    return PolicyModels{std::move(main), std::move(draft), Standardizer::identity(3)};
}

}  // namespace fixtures
