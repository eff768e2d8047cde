#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "specflow/config.hpp"
#include "specflow/runtime.hpp"

namespace specflow {

/// One benchmark cell: a method run on one (speed, variant) with fixed runtime knobs.
struct Condition {
    MethodSpec method;
    std::string speed = "demo";
    std::string variant = "toy_dog";
    RuntimePolicy runtime;  // mode already matches method.mode

    // e.g. "flash/flash_triton@demo/toy_dog d=0.15 K=2 pf=2 fb=1"; no commas.
    std::string label() const;
};

Condition make_condition(const Config& cfg, const MethodSpec& method, const std::string& speed,
                         const std::string& variant);

// Expands cfg.bench.grid into conditions, in a fixed order.
std::vector<Condition> grid_conditions(const Config& cfg);

// Paired across conditions: trial e sees the same world in every condition.
std::uint64_t episode_env_seed(std::uint64_t bench_seed, int trial);
std::uint64_t episode_run_seed(std::uint64_t bench_seed, int trial);

struct EpisodeRun {
    int trial = 0;
    std::uint64_t env_seed = 0;
    std::uint64_t run_seed = 0;
    bool success = false;
    FailureReason failure = FailureReason::none;
    long ticks = 0;
    EpisodeStats stats;  // as reported by the runtime
    std::vector<RoundRecord> trace;
};

struct ConditionRuns {
    Condition condition;
    std::vector<EpisodeRun> episodes;
};

// Runs `trials` paired episodes per condition on `threads` workers. Results are
// ordered by (condition, trial) regardless of scheduling.
std::vector<ConditionRuns> run_conditions(const Config& cfg, const PolicyModels& models,
                                          const std::vector<Condition>& conditions, int trials,
                                          std::uint64_t seed, int threads = 1);

struct ConditionInfo {
    std::string label;
    MethodSpec method;
    std::string speed;
    std::string variant;
    int replan = 12;
    double delta = 0.0;
    int timesteps = 0;
    int pf = 0;
    bool fb = false;
    double full_ms = 0.0;   // cost profile, needed for audits without the config
    double flash_ms = 0.0;  // 0 when the profile has no flash path
    double tick_ms = 10.0;
    bool additive_fallback = true;
    bool cap_prefix = true;
};

ConditionInfo describe(const Config& cfg, const Condition& c);

struct EpisodeSummary {
    int trial = 0;
    std::uint64_t env_seed = 0;
    std::uint64_t run_seed = 0;
    FailureReason failure = FailureReason::none;
    long ticks = 0;
    EpisodeStats stats;
};

struct ConditionReport {
    ConditionInfo info;
    int trials = 0;
    // Pooled over every round of every trial.
    double sr = 0.0;
    double lat_ms = 0.0;
    double per_action_ms = 0.0;
    double fr = 0.0;
    double acc = 0.0;
    double speedup = 0.0;
    long rounds = 0;
    long flash_accepted = 0;
    long executed_actions = 0;
    std::vector<EpisodeSummary> episodes;
};

struct SuiteReport {
    std::string fingerprint;
    std::string code_version;
    std::uint64_t seed = 0;
    int trials = 0;
    std::string baseline;         // method label
    double baseline_full_ms = 0;  // used when the baseline is not in the grid
    std::vector<ConditionReport> conditions;
};

// The fold shared by bench and report: per-episode stats from the round
// trace, pooled aggregates, speedup against the baseline at the same
// (speed, variant) or against baseline_full_ms.
SuiteReport aggregate(const std::string& fingerprint, std::uint64_t seed, int trials,
                      const std::string& baseline, double baseline_full_ms,
                      const std::vector<ConditionInfo>& infos,
                      const std::vector<std::vector<EpisodeRun>>& episodes);

SuiteReport make_report(const Config& cfg, const std::vector<ConditionRuns>& runs, int trials,
                        std::uint64_t seed);

// --- persistence ---------------------------------------------------------------

nlohmann::json round_to_json(const RoundRecord& r);
RoundRecord round_from_json(const nlohmann::json& j);

// JSONL: a header line, then per episode its round lines and one episode line.
void write_trace(std::ostream& out, const SuiteReport& report, const std::vector<ConditionRuns>& runs);

struct ParsedTrace {
    std::string fingerprint;
    std::uint64_t seed = 0;
    int trials = 0;
    std::string baseline;
    double baseline_full_ms = 0.0;
    std::vector<ConditionInfo> infos;
    std::vector<std::vector<EpisodeRun>> episodes;
};

// Throws std::runtime_error naming the offending line.
ParsedTrace read_trace(std::istream& in);
SuiteReport reaggregate(const ParsedTrace& trace);

nlohmann::json to_json(const SuiteReport& report);
SuiteReport report_from_json(const nlohmann::json& j);

extern const std::vector<std::string> kCsvColumns;
void write_csv(std::ostream& out, const SuiteReport& report);

struct ReportFiles {
    std::filesystem::path csv;
    std::filesystem::path json;
    std::filesystem::path trace;
};

// Writes report.csv, report.json and trace.jsonl under `dir`.
ReportFiles emit_report(const SuiteReport& report, const std::vector<ConditionRuns>& runs,
                        const std::filesystem::path& dir);

// Field-by-field comparison; returns human-readable mismatches.
std::vector<std::string> compare_reports(const SuiteReport& a, const SuiteReport& b, double tol = 0.0);

// Runtime identities on a parsed trace; returns violations, empty when clean.
std::vector<std::string> audit_trace(const ParsedTrace& trace);

// Full bench: obtain models, run the grid, write reports, verify the re-fold.
struct BenchOutcome {
    SuiteReport report;
    ReportFiles files;
};

BenchOutcome run_benchmark(const Config& cfg, std::uint64_t seed, std::ostream* log);

std::string code_version();

}  // namespace specflow
