#include "subo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <unordered_set>

namespace subo {

namespace {

void check_caps(const ProblemInstance& instance, const ExactEvalCaps& caps) {
  if (instance.cardinality() > caps.max_cardinality)
    throw EnumerationCapExceeded("exact evaluation: cardinality above cap");
  if (binomial(instance.num_elements(), instance.cardinality()) > caps.max_terminals)
    throw EnumerationCapExceeded("exact evaluation: terminal count above cap");
}

StateSet uniform_terminal(const ProblemInstance& instance, Rng& rng) {
  const std::size_t n = instance.num_elements();
  std::vector<Element> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<Element>(i);
  for (std::size_t j = 0; j < instance.cardinality(); ++j)
    std::swap(pool[j], pool[j + uniform_index(rng, n - j)]);
  pool.resize(instance.cardinality());
  return StateSet(std::move(pool));
}

}  // namespace

double learned_terminal_probability(const PolicyEvaluator& evaluator, const StateSet& terminal) {
  const std::size_t c = terminal.size();
  if (c != evaluator.policy().cardinality())
    throw std::invalid_argument("learned_terminal_probability: not a terminating state");
  if (c > 24) throw EnumerationCapExceeded("learned_terminal_probability: C too large");
  const auto members = terminal.members();
  const std::uint32_t full = (1u << c) - 1;
  std::vector<double> mass(std::size_t{1} << c, 0.0);
  std::vector<double> probs(evaluator.policy().num_elements());
  mass[0] = 1.0;
  // masks only grow by setting bits, so increasing numeric order is topological
  for (std::uint32_t mask = 0; mask < full; ++mask) {
    if (mass[mask] == 0.0) continue;
    std::vector<Element> in;
    for (std::size_t j = 0; j < c; ++j)
      if (mask & (1u << j)) in.push_back(members[j]);
    evaluator.probabilities(StateSet(std::move(in)), probs);
    for (std::size_t j = 0; j < c; ++j)
      if (!(mask & (1u << j))) mass[mask | (1u << j)] += mass[mask] * probs[members[j]];
  }
  return mass[full];
}

std::vector<double> learned_terminal_distribution(const Policy& policy, const ProblemInstance& instance,
                                                  const ExactEvalCaps& caps) {
  check_caps(instance, caps);
  if (policy.num_elements() != instance.num_elements() || policy.cardinality() != instance.cardinality())
    throw std::invalid_argument("learned_terminal_distribution: policy and instance disagree");
  const std::size_t n = instance.num_elements();
  const std::size_t c = instance.cardinality();
  const SubsetRanker ranker(n, c);
  const PolicyEvaluator evaluator(policy);
  std::vector<double> layer{1.0};
  std::vector<double> probs(n);
  for (std::size_t k = 0; k < c; ++k) {
    std::vector<double> next(ranker.count(k + 1), 0.0);
    for (std::uint64_t r = 0; r < layer.size(); ++r) {
      if (layer[r] == 0.0) continue;
      const StateSet s = ranker.unrank(r, k);
      evaluator.probabilities(s, probs);
      for (std::size_t a = 0; a < n; ++a) {
        if (probs[a] == 0.0) continue;
        next[ranker.rank_with(s, static_cast<Element>(a))] += layer[r] * probs[a];
      }
    }
    layer = std::move(next);
  }
  return layer;
}

std::vector<double> target_terminal_distribution(const SetFunction& reward, const ProblemInstance& instance,
                                                 const ExactEvalCaps& caps) {
  check_caps(instance, caps);
  const SubsetRanker ranker(instance.num_elements(), instance.cardinality());
  const std::uint64_t count = ranker.count(instance.cardinality());
  std::vector<double> p(count);
  double z = 0.0;
  for (std::uint64_t r = 0; r < count; ++r) {
    p[r] = reward(ranker.unrank(r, instance.cardinality()));
    if (p[r] < 0.0) throw std::invalid_argument("target distribution: negative reward");
    z += p[r];
  }
  if (!(z > 0.0)) throw std::invalid_argument("target distribution: zero partition function");
  for (double& v : p) v /= z;
  return p;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - q[i]);
  return 0.5 * s;
}

double exact_tv(const Policy& policy, const ProblemInstance& instance, const SetFunction& reward,
                const ExactEvalCaps& caps) {
  const auto learned = learned_terminal_distribution(policy, instance, caps);
  const auto target = target_terminal_distribution(reward, instance, caps);
  return total_variation(learned, target);
}

FcsResult fcs(const Policy& policy, const ProblemInstance& instance, const SetFunction& reward,
              const FcsConfig& config, Rng& rng) {
  const PolicyEvaluator evaluator(policy);
  std::vector<StateSet> all;
  if (config.force_full) {
    check_caps(instance, config.caps);
    for (const StateSet& x : enumerate_terminating_states(instance, config.caps.max_terminals)) all.push_back(x);
  }
  FcsResult out;
  double sum = 0.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<StateSet> subgraph;
    if (config.force_full) {
      subgraph = all;
    } else {
      std::unordered_set<StateSet, StateSetHash> seen;
      for (std::size_t i = 0; i < config.forward_samples; ++i)
        seen.insert(sample_trajectory(evaluator, instance, 0.0, rng).terminal());
      for (std::size_t i = 0; i < config.backward_samples; ++i)
        seen.insert(sample_backward_to(instance, uniform_terminal(instance, rng), rng).terminal());
      subgraph.assign(seen.begin(), seen.end());
      std::sort(subgraph.begin(), subgraph.end());
    }
    if (subgraph.size() < 2) {
      ++out.epochs_skipped;
      continue;
    }
    std::vector<double> learned(subgraph.size()), target(subgraph.size());
    double z_learned = 0.0, z_target = 0.0;
    for (std::size_t i = 0; i < subgraph.size(); ++i) {
      learned[i] = learned_terminal_probability(evaluator, subgraph[i]);
      target[i] = reward(subgraph[i]);
      z_learned += learned[i];
      z_target += target[i];
    }
    if (!(z_learned > 0.0) || !(z_target > 0.0)) {
      ++out.epochs_skipped;
      continue;
    }
    for (std::size_t i = 0; i < subgraph.size(); ++i) {
      learned[i] /= z_learned;
      target[i] /= z_target;
    }
    sum += total_variation(learned, target);
    ++out.epochs_used;
  }
  out.value = out.epochs_used ? sum / static_cast<double>(out.epochs_used) : 0.0;
  return out;
}

TopKResult top_k_avg(std::span<const double> terminal_rewards, std::size_t k) {
  if (k == 0) throw std::invalid_argument("top_k_avg: k must be positive");
  if (terminal_rewards.empty()) throw std::invalid_argument("top_k_avg: no observed terminals");
  std::vector<double> r(terminal_rewards.begin(), terminal_rewards.end());
  TopKResult out;
  out.under_k = r.size() < k;
  const std::size_t take = std::min(k, r.size());
  std::partial_sort(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(take), r.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < take; ++i) s += r[i];
  out.value = s / static_cast<double>(take);
  return out;
}

TopKResult top_k_avg(const ObservationLedger& ledger, std::size_t k) {
  return top_k_avg(ledger.terminal_rewards(), k);
}

}  // namespace subo
