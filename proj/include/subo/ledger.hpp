#pragma once

// Observation ledger and submodular upper-bound index.
//
// For a terminal x, an intermediate s, and an action a with s + {a} and the
// parent p = x \ {a} all observed (s a proper subset of p, a not in p):
//
//   R(x) <= UB(x | s, a) = R(s + {a}) - R(s) + R(p)
//
// The index keeps, per unobserved terminal, the tightest bound derived so far
// and updates incrementally as states are observed.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "subo/dag.hpp"

namespace subo {

class SetFunction;

struct LedgerConsistencyError : std::logic_error {
  using std::logic_error::logic_error;
};

class ObservationLedger {
 public:
  explicit ObservationLedger(const ProblemInstance& instance);

  /// Returns true if the state is new. Re-inserting with a different reward throws.
  bool insert(const StateSet& state, double reward);

  std::optional<double> reward(const StateSet& state) const;
  bool contains(const StateSet& state) const { return observations_.contains(state); }
  std::size_t size() const { return observations_.size(); }

  const std::unordered_set<StateSet, StateSetHash>& observed_terminals() const {
    return observed_terminals_;
  }
  bool terminal_observed(const StateSet& x) const { return observed_terminals_.contains(x); }
  /// Max reward over observed terminals, -inf if none.
  double best_terminal_reward() const { return best_terminal_reward_; }
  /// True rewards of the observed terminals (unordered).
  std::vector<double> terminal_rewards() const;

  const ProblemInstance& instance() const { return instance_; }
  const std::unordered_map<StateSet, double, StateSetHash>& observations() const {
    return observations_;
  }

  /// One line per state, "sorted indices<TAB>reward", states in canonical order.
  void dump(std::ostream& out) const;

 private:
  ProblemInstance instance_;
  std::unordered_map<StateSet, double, StateSetHash> observations_;
  std::unordered_set<StateSet, StateSetHash> observed_terminals_;
  double best_terminal_reward_ = -std::numeric_limits<double>::infinity();
};

struct UpperBoundEntry {
  StateSet terminal;
  double value = 0.0;
  StateSet witness_intermediate;
  Element witness_action = 0;
  StateSet witness_parent;
};

struct BoundConfig {
  /// Clamp bound values to the reward's known maximum, when one is given.
  bool clamp_to_max = true;
  std::optional<double> max_value;
  /// When false, bounds are also derived and kept for observed terminals. The
  /// coverage analysis counts these; training never uses that mode.
  bool exclude_observed = true;
  /// Rewards are integer multiples of 1/q (see SetFunction::reward_denominator).
  /// The bound is then formed on integer numerators and rounded once, so it
  /// never falls below R(x) through floating-point cancellation.
  std::optional<std::uint64_t> reward_denominator;
};

/// Bound settings matching a reward function's known maximum and granularity.
BoundConfig bound_config_for(const SetFunction& reward, bool exclude_observed = true);

/// R(s + {a}) - R(s) + R(p), clamped per config. Shared by derivation and checks
/// so that recomputation is bit-identical.
double bound_value(const ObservationLedger& ledger, const StateSet& intermediate, Element action,
                   const StateSet& parent, const BoundConfig& config);

class BoundIndex {
 public:
  BoundIndex(const ProblemInstance& instance, BoundConfig config = {});

  /// Incremental update after `state` was newly inserted into `ledger`.
  /// Returns the number of bound entries created or tightened.
  std::size_t on_observe(const ObservationLedger& ledger, const StateSet& state);

  const UpperBoundEntry* find(const StateSet& terminal) const;
  /// Bounded terminals, densely stored (order changes on eviction).
  std::span<const UpperBoundEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Cumulative number of (s, a, parent) bound derivations so far.
  std::uint64_t derivations() const { return derivations_; }
  const BoundConfig& config() const { return config_; }

  /// Transitions (s, a) with s and s + {a} both observed, |s| < C - 1, keyed by a.
  const std::unordered_map<Element, std::vector<StateSet>>& transition_index() const {
    return transition_index_;
  }
  /// Observed states of size C - 1.
  const std::vector<StateSet>& parent_index() const { return parents_; }

 private:
  std::size_t add_transition(const ObservationLedger& ledger, const StateSet& s, Element a);
  std::size_t add_parent(const ObservationLedger& ledger, const StateSet& p);
  std::size_t consider(const ObservationLedger& ledger, const StateSet& s, Element a,
                       const StateSet& p);
  void evict(const StateSet& terminal);

  ProblemInstance instance_;
  BoundConfig config_;
  std::vector<UpperBoundEntry> entries_;
  std::unordered_map<StateSet, std::size_t, StateSetHash> slot_;
  std::unordered_map<Element, std::vector<StateSet>> transition_index_;
  std::unordered_map<StateSet, std::vector<Element>, StateSetHash> transitions_from_;
  std::vector<StateSet> parents_;
  std::vector<std::vector<std::uint32_t>> parents_by_element_;
  std::uint64_t derivations_ = 0;
};

/// Inserts a single observation and updates the index.
std::size_t record_observation(ObservationLedger& ledger, BoundIndex& index,
                               const StateSet& state, double reward);

/// Inserts every prefix of the trajectory (rewards_by_prefix[t] is R(s_t),
/// t = 0..C) and derives new bounds. Returns bound entries created or tightened.
std::size_t record_trajectory(ObservationLedger& ledger, BoundIndex& index,
                              const Trajectory& trajectory, std::span<const double> rewards_by_prefix);

std::optional<UpperBoundEntry> tightest_bound(const BoundIndex& index, const StateSet& terminal);

/// With filtering, only bounds strictly above the best observed terminal reward.
std::vector<const UpperBoundEntry*> active_bounds(const BoundIndex& index,
                                                  const ObservationLedger& ledger,
                                                  bool filtering_on);

/// Number of unobserved terminals carrying at least one bound.
inline std::size_t coverage_count(const BoundIndex& index) { return index.size(); }

struct PartitionEstimate {
  double value = 0.0;
  /// True when every terminal is either observed or bounded.
  bool complete = false;
};

/// Sum of tightest bounds over bounded terminals plus true rewards over observed ones.
PartitionEstimate optimistic_partition(const BoundIndex& index, const ObservationLedger& ledger);

}  // namespace subo
