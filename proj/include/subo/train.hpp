#pragma once

// Online/offline Trajectory Balance training for the classical sampler and the
// two bound-augmented variants.
//
// Online, each step samples a batch of trajectories, pays for their rewards
// through the metered oracle and takes one gradient step. The classical variant
// queries only the terminal; the bound variants query every prefix and feed the
// ledger. Once the budget runs out the run continues offline on stored data.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "subo/ledger.hpp"
#include "subo/metrics.hpp"
#include "subo/policy.hpp"
#include "subo/rewards.hpp"

namespace subo {

enum class Variant { classical, subo, subo_f };

std::string to_string(Variant v);
/// Accepts "classical", "subo", "subo_f" (also "subo-f"); throws std::invalid_argument.
Variant parse_variant(const std::string& name);

struct TrainConfig {
  Variant variant = Variant::classical;
  std::uint64_t query_budget = 10'000;
  std::size_t batch_size = 16;
  double lr_policy = 1e-4;
  double lr_log_z = 1e-2;
  Optimizer::Kind optimizer = Optimizer::Kind::sgd;
  double epsilon = 0.1;
  /// Share of each bound-variant batch drawn from the replay buffer.
  double mix_buffer_fraction = 0.25;
  /// Offline steps after the budget runs out (ignored when total_steps is set).
  std::uint64_t offline_steps = 0;
  /// Exact number of gradient steps over both phases. Online steps stop here
  /// even if budget remains.
  std::optional<std::uint64_t> total_steps;
  /// Cap on online steps when total_steps is unset and the budget never runs out.
  std::uint64_t max_online_steps = 100'000;
  std::uint64_t seed = 0;

  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 128;
  double init_scale = 1.0;
  /// 0 means the query budget (a trajectory costs at least one query when new).
  std::size_t buffer_capacity = 0;
  /// Floor applied to R(x) and UB(x) before they enter the loss.
  double reward_floor = 1e-6;

  std::uint64_t eval_interval = 100;
  std::size_t top_k = 100;
  bool eval_fcs = true;
  FcsConfig fcs;
  bool eval_exact_tv = true;
  ExactEvalCaps exact_caps;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct ReplayEntry {
  Trajectory trajectory;
  /// R(s_t) for t = 0..C; NaN where the prefix was not queried.
  std::vector<double> prefix_rewards;
  double terminal_reward() const { return prefix_rewards.back(); }
};

/// FIFO with oldest-first eviction once `capacity` entries are held.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(ReplayEntry entry);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const ReplayEntry& operator[](std::size_t i) const { return entries_[i]; }
  const ReplayEntry& sample(Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<ReplayEntry> entries_;
};

struct TrainedRun {
  TrainedRun(Policy p, ObservationLedger l, BoundIndex i)
      : policy(std::move(p)), ledger(std::move(l)), index(std::move(i)) {}

  Policy policy;
  ObservationLedger ledger;
  BoundIndex index;
  std::vector<MetricsRecord> metrics;
  std::uint64_t steps = 0;
  std::uint64_t online_steps = 0;
  std::uint64_t queries_used = 0;
  /// Step (1-based) on which the budget ran out.
  std::optional<std::uint64_t> exhausted_at_step;
  /// Metrics row taken on that step.
  std::optional<MetricsRecord> at_exhaustion;
  /// Batches that wanted bound samples but found no active bound.
  std::uint64_t bound_fallbacks = 0;
  /// Trajectories cut off by budget exhaustion; their queried prefixes stay in
  /// the ledger but they never enter the buffer.
  std::uint64_t dropped_partial = 0;
  std::size_t buffer_size = 0;
};

using MetricsCallback = std::function<void(const MetricsRecord&)>;

/// Runs one training job. `element_feature` is passed to the policy (empty for
/// none). Deterministic for a fixed config, instance, reward and feature.
TrainedRun train(const TrainConfig& config, const ProblemInstance& instance, const SetFunction& reward,
                 std::vector<double> element_feature = {}, const MetricsCallback& on_record = {});

/// Degree of each vertex divided by the maximum degree (all zero for an edgeless graph).
std::vector<double> normalized_degree_feature(const CoverageGraph& graph);

}  // namespace subo
