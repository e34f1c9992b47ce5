#pragma once

// Distribution-matching metrics for a trained forward policy (epsilon = 0).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "subo/dag.hpp"
#include "subo/ledger.hpp"
#include "subo/policy.hpp"
#include "subo/rewards.hpp"
#include "subo/rng.hpp"

namespace subo {

struct ExactEvalCaps {
  std::uint64_t max_terminals = 1'000'000;
  std::size_t max_cardinality = 6;
};

/// P~(x) for one terminal: sum over orderings of x of the product of P_F,
/// evaluated by dynamic programming over the 2^C subsets of x.
double learned_terminal_probability(const PolicyEvaluator& evaluator, const StateSet& terminal);

/// P~ over all terminals, indexed by SubsetRanker colex rank. Computed by
/// pushing probability mass layer by layer through the DAG, so every
/// non-terminal state is evaluated once. Throws EnumerationCapExceeded beyond caps.
std::vector<double> learned_terminal_distribution(const Policy& policy, const ProblemInstance& instance,
                                                  const ExactEvalCaps& caps = {});

/// R(x) / Z over all terminals in the same rank order.
std::vector<double> target_terminal_distribution(const SetFunction& reward, const ProblemInstance& instance,
                                                 const ExactEvalCaps& caps = {});

/// (1/2) sum |p - q|; sizes must match.
double total_variation(std::span<const double> p, std::span<const double> q);

double exact_tv(const Policy& policy, const ProblemInstance& instance, const SetFunction& reward,
                const ExactEvalCaps& caps = {});

struct FcsConfig {
  std::size_t forward_samples = 128;
  std::size_t backward_samples = 8;
  std::size_t epochs = 25;
  /// Use all of X as the subgraph every epoch (requires an enumerable instance).
  bool force_full = false;
  ExactEvalCaps caps;
};

struct FcsResult {
  double value = 0.0;
  std::size_t epochs_used = 0;
  std::size_t epochs_skipped = 0;
};

/// Flow consistency on sampled subgraphs. Each epoch gathers a terminal set X'
/// from forward samples of the policy plus uniformly drawn terminals, then takes
/// the TV between P~ and R, each restricted to X' and renormalized. Epochs with
/// |X'| < 2 are skipped. The reward is evaluated directly, never through a
/// metered oracle.
FcsResult fcs(const Policy& policy, const ProblemInstance& instance, const SetFunction& reward,
              const FcsConfig& config, Rng& rng);

struct TopKResult {
  double value = 0.0;
  /// Fewer than k terminals observed; value is the mean over all of them.
  bool under_k = false;
};

/// Mean of the k largest true rewards among observed terminals. Throws
/// std::invalid_argument for k = 0 or when nothing has been observed.
TopKResult top_k_avg(const ObservationLedger& ledger, std::size_t k);
TopKResult top_k_avg(std::span<const double> terminal_rewards, std::size_t k);

/// One row of the per-run time series.
struct MetricsRecord {
  std::uint64_t step = 0;
  /// "online", "offline", or "transition" for the step on which the budget ran out.
  std::string phase;
  std::uint64_t queries_used = 0;
  double loss = 0.0;
  std::optional<double> fcs;
  std::optional<double> exact_tv;
  std::optional<double> top_k_avg;
  bool top_k_under = false;
  std::uint64_t num_bounds = 0;
  std::uint64_t coverage = 0;
};

}  // namespace subo
