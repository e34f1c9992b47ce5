#pragma once

// The distribution a sampler converges to when it is trained on true rewards
// for observed terminals and on upper bounds for the rest:
//
//   Z~ = sum_{x bounded} UB(x) + sum_{x observed} R(x) = Z + sum Delta(x)
//   P~(x) = UB(x) / Z~ (bounded)   or   R(x) / Z~ (observed)
//
// with optimism gap Delta(x) = UB(x) - R(x) >= 0.

#include <optional>
#include <span>
#include <vector>

namespace subo {

/// Terminal rewards R(x) > 0 and, for bounded (unobserved) terminals, UB(x) >= R(x).
struct OptimisticTargets {
  std::vector<double> reward;
  std::vector<std::optional<double>> upper_bound;
};

/// R(x) / Z.
std::vector<double> target_distribution(std::span<const double> reward);
/// Z~ as above; throws if a bound is below its reward.
double optimistic_partition_value(const OptimisticTargets& t);
/// P~ as above.
std::vector<double> biased_distribution(const OptimisticTargets& t);

struct OversamplingTerms {
  double lhs = 0.0;  // (1 - P(x)) / P(x) * Delta(x)
  double rhs = 0.0;  // sum of Delta over the other bounded terminals
};
/// Both sides of the oversampling condition for a bounded terminal `x`;
/// oversampling (P~(x) >= P(x)) holds exactly when lhs >= rhs.
OversamplingTerms oversampling_terms(const OptimisticTargets& t, std::size_t x);

/// P~(x) - P(x) in closed form:
///   R(x) / (Z Z~) * [ (1 - P(x)) / P(x) * Delta(x) - sum_{x' != x} Delta(x') ]
/// whose sign is the sign of lhs - rhs. Used to cross-check the direct difference.
double oversampling_gap(const OptimisticTargets& t, std::size_t x);

}  // namespace subo
