#include "subo/optimism.hpp"

#include <stdexcept>

namespace subo {

namespace {

void validate(const OptimisticTargets& t) {
  if (t.reward.size() != t.upper_bound.size())
    throw std::invalid_argument("optimistic targets: reward and bound sizes differ");
  for (std::size_t i = 0; i < t.reward.size(); ++i) {
    if (!(t.reward[i] > 0.0)) throw std::invalid_argument("optimistic targets: rewards must be positive");
    if (t.upper_bound[i] && *t.upper_bound[i] < t.reward[i])
      throw std::invalid_argument("optimistic targets: bound below reward");
  }
}

double total(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

double gap_sum_excluding(const OptimisticTargets& t, std::size_t skip) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.reward.size(); ++i)
    if (i != skip && t.upper_bound[i]) s += *t.upper_bound[i] - t.reward[i];
  return s;
}

}  // namespace

std::vector<double> target_distribution(std::span<const double> reward) {
  const double z = total(reward);
  if (!(z > 0.0)) throw std::invalid_argument("target_distribution: zero partition function");
  std::vector<double> p(reward.begin(), reward.end());
  for (double& v : p) v /= z;
  return p;
}

double optimistic_partition_value(const OptimisticTargets& t) {
  validate(t);
  double z = 0.0;
  for (std::size_t i = 0; i < t.reward.size(); ++i) z += t.upper_bound[i] ? *t.upper_bound[i] : t.reward[i];
  return z;
}

std::vector<double> biased_distribution(const OptimisticTargets& t) {
  const double z = optimistic_partition_value(t);
  std::vector<double> p(t.reward.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = (t.upper_bound[i] ? *t.upper_bound[i] : t.reward[i]) / z;
  return p;
}

OversamplingTerms oversampling_terms(const OptimisticTargets& t, std::size_t x) {
  validate(t);
  if (x >= t.reward.size() || !t.upper_bound[x])
    throw std::invalid_argument("oversampling_terms: x must be a bounded terminal");
  const double p = t.reward[x] / total(t.reward);
  OversamplingTerms out;
  out.lhs = (1.0 - p) / p * (*t.upper_bound[x] - t.reward[x]);
  out.rhs = gap_sum_excluding(t, x);
  return out;
}

double oversampling_gap(const OptimisticTargets& t, std::size_t x) {
  const auto terms = oversampling_terms(t, x);
  const double z = total(t.reward);
  const double z_tilde = optimistic_partition_value(t);
  return t.reward[x] / (z * z_tilde) * (terms.lhs - terms.rhs);
}

}  // namespace subo
