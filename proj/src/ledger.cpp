#include "subo/ledger.hpp"

#include "subo/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace subo {

ObservationLedger::ObservationLedger(const ProblemInstance& instance) : instance_(instance) {}

bool ObservationLedger::insert(const StateSet& state, double reward) {
  auto [it, inserted] = observations_.emplace(state, reward);
  if (!inserted) {
    if (it->second != reward)
      throw LedgerConsistencyError("reward mismatch on re-insertion of state {" +
                                   state.to_string() + "}");
    return false;
  }
  if (instance_.is_terminal(state)) {
    observed_terminals_.insert(state);
    best_terminal_reward_ = std::max(best_terminal_reward_, reward);
  }
  return true;
}

std::optional<double> ObservationLedger::reward(const StateSet& state) const {
  auto it = observations_.find(state);
  if (it == observations_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> ObservationLedger::terminal_rewards() const {
  std::vector<double> out;
  out.reserve(observed_terminals_.size());
  for (const auto& x : observed_terminals_) out.push_back(observations_.at(x));
  return out;
}

void ObservationLedger::dump(std::ostream& out) const {
  std::vector<const std::pair<const StateSet, double>*> rows;
  rows.reserve(observations_.size());
  for (const auto& kv : observations_) rows.push_back(&kv);
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->first < b->first; });
  char buf[64];
  for (auto* row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row->second);
    out << row->first.to_string() << '\t' << buf << '\n';
  }
}

double bound_value(const ObservationLedger& ledger, const StateSet& intermediate, Element action,
                   const StateSet& parent, const BoundConfig& config) {
  const double top = *ledger.reward(intermediate.with(action));
  const double bottom = *ledger.reward(intermediate);
  const double par = *ledger.reward(parent);
  double value = 0.0;
  if (config.reward_denominator) {
    const double q = static_cast<double>(*config.reward_denominator);
    const auto numerator = [q](double r) { return std::llround(r * q); };
    value = static_cast<double>(numerator(top) - numerator(bottom) + numerator(par)) / q;
  } else {
    value = top - bottom + par;
  }
  if (config.clamp_to_max && config.max_value && value > *config.max_value)
    value = *config.max_value;
  return value;
}

BoundConfig bound_config_for(const SetFunction& reward, bool exclude_observed) {
  BoundConfig cfg;
  cfg.max_value = reward.max_value();
  cfg.reward_denominator = reward.reward_denominator();
  cfg.exclude_observed = exclude_observed;
  return cfg;
}

BoundIndex::BoundIndex(const ProblemInstance& instance, BoundConfig config)
    : instance_(instance),
      config_(config),
      parents_by_element_(instance.num_elements()) {}

const UpperBoundEntry* BoundIndex::find(const StateSet& terminal) const {
  auto it = slot_.find(terminal);
  return it == slot_.end() ? nullptr : &entries_[it->second];
}

void BoundIndex::evict(const StateSet& terminal) {
  auto it = slot_.find(terminal);
  if (it == slot_.end()) return;
  const std::size_t idx = it->second;
  slot_.erase(it);
  if (idx + 1 != entries_.size()) {
    entries_[idx] = std::move(entries_.back());
    slot_[entries_[idx].terminal] = idx;
  }
  entries_.pop_back();
}

std::size_t BoundIndex::consider(const ObservationLedger& ledger, const StateSet& s, Element a,
                                 const StateSet& p) {
  StateSet x = p.with(a);
  if (config_.exclude_observed && ledger.terminal_observed(x)) return 0;
  ++derivations_;
  const double value = bound_value(ledger, s, a, p, config_);
  auto it = slot_.find(x);
  if (it == slot_.end()) {
    slot_.emplace(x, entries_.size());
    entries_.push_back(UpperBoundEntry{std::move(x), value, s, a, p});
    return 1;
  }
  UpperBoundEntry& e = entries_[it->second];
  if (value < e.value) {  // ties keep the earlier witness
    e.value = value;
    e.witness_intermediate = s;
    e.witness_action = a;
    e.witness_parent = p;
    return 1;
  }
  return 0;
}

std::size_t BoundIndex::add_transition(const ObservationLedger& ledger, const StateSet& s,
                                       Element a) {
  transitions_from_[s].push_back(a);
  transition_index_[a].push_back(s);
  std::size_t changed = 0;
  if (s.empty()) {
    for (const StateSet& p : parents_)
      if (!p.contains(a)) changed += consider(ledger, s, a, p);
    return changed;
  }
  // scan the parents containing the rarest member of s
  const std::vector<std::uint32_t>* candidates = nullptr;
  for (Element e : s) {
    const auto& list = parents_by_element_[e];
    if (!candidates || list.size() < candidates->size()) candidates = &list;
  }
  for (std::uint32_t idx : *candidates) {
    const StateSet& p = parents_[idx];
    if (!p.contains(a) && s.is_subset_of(p)) changed += consider(ledger, s, a, p);
  }
  return changed;
}

std::size_t BoundIndex::add_parent(const ObservationLedger& ledger, const StateSet& p) {
  const auto idx = static_cast<std::uint32_t>(parents_.size());
  parents_.push_back(p);
  for (Element e : p) parents_by_element_[e].push_back(idx);

  std::size_t changed = 0;
  const auto members = p.members();
  const std::size_t k = members.size();
  if (k >= 32) throw std::length_error("BoundIndex: parent too large for subset sweep");
  std::vector<Element> buf;
  buf.reserve(k);
  const std::uint64_t full = (std::uint64_t{1} << k) - 1;
  for (std::uint64_t mask = 0; mask < full; ++mask) {
    buf.clear();
    for (std::size_t i = 0; i < k; ++i)
      if (mask & (std::uint64_t{1} << i)) buf.push_back(members[i]);
    const StateSet s(buf);
    auto it = transitions_from_.find(s);
    if (it == transitions_from_.end()) continue;
    for (Element a : it->second)
      if (!p.contains(a)) changed += consider(ledger, s, a, p);
  }
  return changed;
}

std::size_t BoundIndex::on_observe(const ObservationLedger& ledger, const StateSet& t) {
  const std::size_t c = instance_.cardinality();
  const std::size_t k = c - 1;
  if (t.size() == c) {
    if (config_.exclude_observed) evict(t);
    return 0;
  }
  if (t.size() > c) throw std::invalid_argument("BoundIndex: state exceeds cardinality");

  std::size_t changed = 0;
  if (t.size() == k) changed += add_parent(ledger, t);
  // t as the upper end s + {b} of a transition
  if (t.size() <= k) {
    for (Element b : t) {
      StateSet s = t.without(b);
      if (ledger.contains(s)) changed += add_transition(ledger, s, b);
    }
  }
  // t as the lower end s of a transition
  if (t.size() + 1 <= k) {
    for (Element a = 0; a < instance_.num_elements(); ++a) {
      if (t.contains(a)) continue;
      if (ledger.contains(t.with(a))) changed += add_transition(ledger, t, a);
    }
  }
  return changed;
}

std::size_t record_observation(ObservationLedger& ledger, BoundIndex& index,
                               const StateSet& state, double reward) {
  if (!ledger.insert(state, reward)) return 0;
  return index.on_observe(ledger, state);
}

std::size_t record_trajectory(ObservationLedger& ledger, BoundIndex& index,
                              const Trajectory& trajectory,
                              std::span<const double> rewards_by_prefix) {
  const auto prefixes = trajectory.prefixes();
  if (rewards_by_prefix.size() != prefixes.size())
    throw std::invalid_argument("record_trajectory: need one reward per prefix");
  std::size_t changed = 0;
  for (std::size_t t = 0; t < prefixes.size(); ++t)
    changed += record_observation(ledger, index, prefixes[t], rewards_by_prefix[t]);
  return changed;
}

std::optional<UpperBoundEntry> tightest_bound(const BoundIndex& index, const StateSet& terminal) {
  if (const auto* e = index.find(terminal)) return *e;
  return std::nullopt;
}

std::vector<const UpperBoundEntry*> active_bounds(const BoundIndex& index,
                                                  const ObservationLedger& ledger,
                                                  bool filtering_on) {
  std::vector<const UpperBoundEntry*> out;
  out.reserve(index.size());
  const double best = ledger.best_terminal_reward();
  for (const auto& e : index.entries())
    if (!filtering_on || e.value > best) out.push_back(&e);
  return out;
}

PartitionEstimate optimistic_partition(const BoundIndex& index, const ObservationLedger& ledger) {
  PartitionEstimate est;
  for (const auto& e : index.entries()) est.value += e.value;
  for (double r : ledger.terminal_rewards()) est.value += r;
  const auto& inst = ledger.instance();
  const BigInt total = binomial(inst.num_elements(), inst.cardinality());
  est.complete = BigInt(index.size() + ledger.observed_terminals().size()) == total;
  return est;
}

}  // namespace subo
