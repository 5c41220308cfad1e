#pragma once

// Experiment plumbing shared by the CLI and the acceptance suite: config
// resolution, safe-set construction, training runs with CSV/checkpoint
// output, and multi-seed summaries.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sgpg/config.hpp"
#include "sgpg/envs.hpp"
#include "sgpg/guide.hpp"
#include "sgpg/trainer.hpp"

namespace sgpg {

struct EvalConfig {
  std::size_t episodes = 10;
  std::size_t every = 1;  // evaluate after every k-th batch
  bool with_guide = false;
  std::uint64_t seed = 1'000'003;
};

struct SafeSetSpec {
  double delta = 0.1;
  std::string terminal = "default";  // default | computed | rows
  std::vector<std::string> safe_rows;      // unshrunk S; empty: the built-in
  std::vector<std::string> terminal_rows;  // unshrunk S_T for terminal = "rows"
};

struct ExperimentConfig {
  std::string name = "experiment";
  EnvSpec env = double_integrator_env();
  SafeSetSpec sets;
  bool guide_enabled = true;
  GuideConfig guide;  // safe / terminal / action_box filled by resolve_safe_sets
  TrainConfig train;
  EvalConfig eval;
  std::size_t checkpoint_every = 10;
  std::string source;  // config text, copied into run directories
};

// Throws ConfigError with the offending key and line.
ExperimentConfig experiment_from_config(const Config& cfg);
ExperimentConfig load_experiment(const std::string& path);

struct SafeSetReport {
  SafeSets sets;  // post-shrink
  bool terminal_invariant = false;
  bool terminal_inside_safe = false;
  bool ok() const { return terminal_invariant && terminal_inside_safe; }
};

// Builds S and S_T (computed, built-in or user rows), applies the shrink and
// checks invariance of S_T and S_T inside S.
SafeSetReport resolve_safe_sets(const ExperimentConfig& cfg);

// Fills guide.safe / guide.terminal / guide.action_box.
GuideConfig guide_config(const ExperimentConfig& cfg, const SafeSets& sets);

struct BatchRow {
  std::size_t batch = 0;
  std::size_t env_steps = 0;
  BatchMetrics metrics;
  UpdateStats update;
  std::optional<EvalMetrics> eval;
  double wall_time = 0.0;
};

struct RunResult {
  std::vector<BatchRow> rows;
  MlpPolicy policy;
  std::size_t total_violations = 0;
};

struct RunOptions {
  std::string run_dir;  // empty: no files written
  bool use_guide = true;
  std::ostream* log = nullptr;
};

// Trains one seed (cfg.train.seed) and, when run_dir is set, writes
// config.toml, safe_set.txt, terminal_set.txt, metrics.csv and checkpoints.
RunResult run_training(const ExperimentConfig& cfg, const RunOptions& opts);

extern const char* const kMetricsHeader;
std::string metrics_csv_row(const BatchRow& row);

// Per-batch mean and std of one metrics column across runs.
struct CurvePoint {
  std::size_t batch = 0;
  double env_steps = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t runs = 0;
};

struct MetricsTable {
  std::string source;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

MetricsTable read_metrics_csv(const std::string& path);
MetricsTable parse_metrics_csv(const std::string& text, const std::string& source = "");

// Keeps the top_k tables ranked by the average of rank_column (all when
// top_k is 0 or exceeds the count); ties keep the input order.
std::vector<MetricsTable> top_k_runs(const std::vector<MetricsTable>& runs,
                                     const std::string& rank_column, std::size_t top_k);
std::vector<CurvePoint> summarize_column(const std::vector<MetricsTable>& runs,
                                         const std::string& column);

}  // namespace sgpg
