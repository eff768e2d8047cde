#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "specflow/config.hpp"
#include "specflow/dataset.hpp"
#include "specflow/diagnostics.hpp"
#include "specflow/runtime.hpp"

namespace specflow {

// Demonstrations, standardizer and exclusions go into the checkpoint
// container; training pairs are rebuilt from `cfg` on load.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, const DatasetConfig& cfg);

struct ArtifactPaths {
    std::filesystem::path dataset;
    std::filesystem::path main;    // main policy only
    std::filesystem::path models;  // main policy plus draft

    static ArtifactPaths in(const std::filesystem::path& dir);
};

struct MainTraining {
    FlowPolicy policy;
    std::vector<double> epoch_losses;
};

MainTraining train_main_policy(const Config& cfg, const Dataset& ds);

struct DraftTraining {
    DraftModel draft;
    DraftTrainResult result;
};

DraftTraining train_draft_model(const Config& cfg, const FlowPolicy& main, const Dataset& ds);

// Provenance block stored with checkpoints: resolved config and seeds.
std::string training_meta(const Config& cfg);

// Generates data and trains both models from scratch; `log` may be null.
PolicyModels train_all(const Config& cfg, std::ostream* log);

// Loads out_dir models; trains and saves them first when missing and
// `train_missing` is set, otherwise throws CheckpointError.
PolicyModels obtain_models(const Config& cfg, bool train_missing, std::ostream* log);

// States along expert rollouts at the default variant and demo speed; the
// stale observation lags the fresh one by one replan window plus a full stall.
std::vector<DiagnosticState> sample_diagnostic_states(const Config& cfg, const PolicyModels& models,
                                                      int count, std::uint64_t seed);

}  // namespace specflow
