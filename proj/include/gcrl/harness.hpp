#pragma once

// Experiment harness: seed fan-out, evaluation aggregation into
// median/quartile rows, TD-error traces, the difficulty grid, multi-arm
// comparisons, and the CSV/manifest files they produce.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gcrl/config.hpp"
#include "gcrl/mlp.hpp"
#include "gcrl/stats.hpp"
#include "gcrl/trainer.hpp"

namespace gcrl {

inline constexpr const char* kSuccessHeader = "episode,median,lq,uq";
inline constexpr const char* kTdErrorHeader = "s,median,lq,uq";
inline constexpr const char* kOutputDirEnv = "GCRL_OUTPUT_DIR";

struct HarnessOptions {
  int jobs = 1;
  bool write_files = true;
};

struct SeedRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  TrainingMetrics metrics;
  std::optional<Mlp> agent;
  // Parallel variant only: the IGOAL control agent A.
  std::optional<TrainingMetrics> control_metrics;
  std::optional<Mlp> control_agent;
};

struct ExperimentResult {
  std::vector<MetricRow> success;
  std::vector<MetricRow> td_error;
  std::vector<MetricRow> control_success;  // parallel variant
  std::vector<SeedRun> runs;
  std::vector<std::filesystem::path> files;
  std::filesystem::path manifest;
};

// Runs fn(i) for i in [0, count) on up to `jobs` worker threads.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

// The evaluation opponent an arm is scored against.
AdversaryPolicy resolve_eval_adversary(const ExperimentConfig& cfg);

// One seed of the configured arm.
SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

// Per-step success rows across seeds (completed seeds only).
std::vector<MetricRow> aggregate_success(const std::vector<const TrainingMetrics*>& runs);
// Rolling-averaged per-episode TD-error rows across seeds, over the common
// episode prefix. Episodes with no candidate pairs are skipped.
std::vector<MetricRow> aggregate_td_error(const std::vector<const TrainingMetrics*>& runs,
                                          std::size_t window);

void write_metric_csv(const std::filesystem::path& path, const char* header,
                      const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metric_csv(const std::filesystem::path& path);

// Output directory precedence: explicit override, then $GCRL_OUTPUT_DIR, then
// the config's output_dir.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                         const std::optional<std::filesystem::path>& override_dir);

// Writes <name>_succ.csv, <name>_tderr.csv, <name>_runs.csv (per seed),
// <name>_manifest.json and, for the parallel variant, <name>_control_succ.csv.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                const HarnessOptions& options = {});

// "blob <len>\0<content>" SHA-1, as git hashes file contents.
std::string content_hash(const std::string& content);

struct GridCell {
  int n = 0;
  int r = 0;
  std::vector<double> success_rates;  // one per model
  double mean_success = 0.0;
  double success_variance = 0.0;
  std::optional<double> mean_successful_length;
  double magnitude = 0.0;
};

struct GridResult {
  std::vector<GridCell> cells;  // n-major
  std::vector<std::filesystem::path> files;
  std::filesystem::path manifest;
};

// Trains grid.models HER agents per (n, r) for grid.train_steps and tests
// each on grid.test_episodes episodes. Writes <name>_grid_success.csv,
// _grid_variance.csv, _grid_length.csv and _grid_magnitude.csv: one row per
// n, one column per r.
GridResult difficulty_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                           const HarnessOptions& options = {});

struct ArmSummary {
  std::string arm;
  double final_median = 0.0;
  double final_lq = 0.0;
  double final_uq = 0.0;
  std::optional<long> steps_to_threshold;  // first step with median >= threshold
};

struct CompareResult {
  std::vector<ExperimentResult> arms;
  std::vector<ArmSummary> summary;
  std::vector<std::filesystem::path> files;
  std::filesystem::path manifest;
};

// Runs each arm and writes <name>_compare.csv (arm,episode,median,lq,uq),
// <name>_summary.csv and a manifest of every arm's config. Throws
// ConfigError if the arms' evaluation cadences differ.
CompareResult compare_arms(const std::vector<ExperimentConfig>& arms, const std::string& name,
                           const std::filesystem::path& out_dir, const HarnessOptions& options = {},
                           double threshold = 0.9);

// A manifest read back: its kind (train, grid or compare) and the configs
// needed to rerun it.
struct Manifest {
  std::string kind;
  std::string name;
  std::vector<ExperimentConfig> configs;  // one per arm for compare
};
Manifest load_manifest(const std::filesystem::path& path);

std::optional<long> first_step_reaching(const std::vector<MetricRow>& rows, double threshold);

}  // namespace gcrl
