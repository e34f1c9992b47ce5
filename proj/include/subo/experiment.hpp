#pragma once

// Experiment orchestration: resolve a key=value config into tasks and training
// configs, run every (variant, seed) pair, and persist per-run CSVs, policy
// checkpoints and a JSON manifest.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subo/config.hpp"
#include "subo/pairing.hpp"
#include "subo/train.hpp"

namespace subo {

enum class TaskKind { er, ba, edge_list };

struct TaskSpec {
  TaskKind kind = TaskKind::er;
  std::size_t n = 10;
  double edge_prob = 0.3;
  std::size_t attach_count = 2;
  std::filesystem::path edge_list;
  std::size_t cardinality = 3;
  /// Unset: each run generates its graph from the run seed.
  std::optional<std::uint64_t> graph_seed;
  bool closed_neighborhood = false;
};

struct ExperimentConfig {
  TaskSpec task;
  std::vector<Variant> variants{Variant::classical, Variant::subo, Variant::subo_f};
  std::vector<std::uint64_t> seeds{0};
  TrainConfig train;
  /// Pass normalized vertex degree to the policy as a per-element feature.
  bool degree_feature = true;
  bool save_checkpoints = true;
  std::filesystem::path out_dir = "runs";

  /// Unknown keys are errors. Relative edge-list paths resolve against `base_dir`.
  static ExperimentConfig from_key_values(const KeyValues& kv, const std::filesystem::path& base_dir = {});
  /// Every field, fully resolved; from_key_values(to_key_values()) round-trips.
  KeyValues to_key_values() const;
  /// Referenced files exist, C <= N/2, train config valid. Throws ConfigError.
  void validate() const;
};

struct Task {
  CoverageGraph graph;
  ProblemInstance instance;
  std::uint64_t graph_seed = 0;
};

Task build_task(const TaskSpec& spec, std::uint64_t run_seed);

/// Exactly `step,phase,queries_used,loss,fcs,exact_tv,top_k_avg,num_bounds,coverage`.
std::string metrics_csv_header();
/// Missing optional metrics are written as empty fields.
std::string metrics_csv_row(const MetricsRecord& r);
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records);

/// Lower-case hex SHA-1 of "blob <size>\0<content>", as git hashes file contents.
std::string git_blob_sha1(std::string_view content);
std::string git_blob_sha1_file(const std::filesystem::path& path);

/// SUBO_THREADS if set and positive, else the hardware concurrency (at least 1).
unsigned threads_from_env();

struct RunSummary {
  Variant variant = Variant::classical;
  std::uint64_t seed = 0;
  std::uint64_t graph_seed = 0;
  std::filesystem::path csv;
  std::filesystem::path checkpoint;
  std::string csv_sha1;
  std::uint64_t steps = 0;
  std::uint64_t queries_used = 0;
  std::optional<std::uint64_t> exhausted_at_step;
  std::optional<MetricsRecord> at_exhaustion;
  MetricsRecord final_record;
};

struct ExperimentResult {
  std::vector<RunSummary> runs;
  std::filesystem::path manifest;
};

/// Runs every (variant, seed) pair on up to `threads` worker threads. Files are
/// named <variant>_seed<seed>.csv / .policy under config.out_dir, plus
/// manifest.json. `overrides` are only recorded in the manifest.
ExperimentResult run_experiment(const ExperimentConfig& config, const KeyValues& overrides = {},
                                unsigned threads = 1, std::ostream* log = nullptr);

/// Recomputes metrics for a saved policy on the task the config describes.
MetricsRecord evaluate_checkpoint(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                                  std::uint64_t seed);

/// Closed form vs exhaustive oracle for all N <= n_max, C <= min(c_max, N/2).
/// Prints one row per (N, C); returns false on the first mismatch after
/// printing the offending tuple.
bool verify_counts(std::uint64_t n_max, std::uint64_t c_max, std::ostream& out);

struct McRow {
  std::uint64_t n = 0, c = 0, m = 0;
  double expected_q = 0.0;
  std::optional<McResult> mc;
  double janson_lower = 0.0;
  std::optional<double> janson_lower_full;
  double coverage_lower = 0.0;
  /// coverage_lower / (m C); 0 at m = 0.
  double ratio = 0.0;
};

/// With `analytic_only` the Monte Carlo and oracle columns are skipped, which
/// allows instances beyond the enumeration caps.
std::vector<McRow> mc_table(std::uint64_t n, std::uint64_t c, const std::vector<std::uint64_t>& m_list,
                            std::uint64_t repetitions, std::uint64_t seed, unsigned threads, bool analytic_only);
std::string mc_csv_header();
void write_mc_csv(std::ostream& out, const std::vector<McRow>& rows, bool header = true);

}  // namespace subo
