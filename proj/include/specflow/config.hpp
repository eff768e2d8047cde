#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "specflow/conveyor.hpp"
#include "specflow/dataset.hpp"
#include "specflow/draft.hpp"
#include "specflow/flow_policy.hpp"
#include "specflow/latency.hpp"
#include "specflow/runtime.hpp"

namespace specflow {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PolicyConfig {
    int horizon = 50;
    int embedding_dims = 32;
    FlowPolicy::Architecture arch;
};

struct MainTrainConfig {
    FlowTrainConfig train{40};
    std::uint64_t seed = 7;
};

struct DraftConfig {
    std::vector<int> hidden{32, 32};
    DraftTrainConfig train;
    std::uint64_t teacher_seed = 3;
    std::uint64_t seed = 11;
};

enum class GridKind { main, verifier, components, single };

std::string to_string(GridKind grid);
GridKind parse_grid(const std::string& name);

/// "mode/profile", e.g. "full_only/torch" or "flash/flash_triton".
struct MethodSpec {
    RunMode mode = RunMode::flash;
    std::string profile = "flash_triton";

    std::string label() const;
    static MethodSpec parse(const std::string& label);
    bool operator==(const MethodSpec&) const = default;
};

struct BenchConfig {
    GridKind grid = GridKind::main;
    std::vector<MethodSpec> methods{{RunMode::full_only, "torch"},
                                    {RunMode::full_only, "triton"},
                                    {RunMode::flash, "flash_triton"}};
    MethodSpec baseline{RunMode::full_only, "torch"};
    std::vector<std::string> speeds{"demo", "medium", "high", "extra_high"};
    std::vector<std::string> variants{"toy_dog", "hairbrush"};
    int trials = 50;
    int threads = 1;
    bool train_missing = true;
    // Ablation axes.
    std::vector<double> deltas{0.0, 0.05, 0.1, 0.15, 0.2};
    std::vector<int> timestep_counts{1, 2, 4};
    std::vector<int> refresh_values{0, 2, 3, 4};
    std::vector<bool> fallback_values{true, false};
};

struct Config {
    ConveyorConfig env;
    std::string default_variant = "toy_dog";
    DatasetConfig dataset;
    std::uint64_t dataset_seed = 1;
    PolicyConfig policy;
    MainTrainConfig main;
    DraftConfig draft;
    RuntimePolicy runtime;
    LatencyCoupling coupling;
    std::map<std::string, CostProfile> profiles;
    BenchConfig bench;
    std::filesystem::path out_dir = "out";

    // Built-in defaults, identical to configs/default.json.
    static Config defaults();

    const CostProfile& profile(const std::string& name) const;
    PolicyShape shape() const;
    void validate() const;
};

// Resolved config as JSON; every key is present.
nlohmann::json to_json(const Config& cfg);

// Merges `j` over the defaults. Unknown keys and type mismatches raise
// ConfigError naming the offending key path, e.g. "/runtime/verifier/delta".
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);

// Stable hash of the resolved config, excluding I/O locations. Key order and
// number spelling in the source file do not matter.
std::string config_fingerprint(const Config& cfg);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace specflow
