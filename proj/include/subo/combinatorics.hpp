#pragma once

// Closed-form counts on the trajectory-pairing graph G(x) and the probability
// bounds built from them. K = C - 1 throughout.
//
//   lambda = K! (N - K - 1)                    trajectories through one parent
//   alpha  = (K + 1)! (N - K - 1)              ... through any parent of x
//   beta   = N (N-1) ... (N-K+1) - (K + 1)!    trajectories compatible with a parent
//   phi    = 2 (K-1)! [binom(N, K-1) - (N-K) K (K-1) / 2 - K]
//
// The counting functions accept any 1 <= C <= N; the C <= N/2 restriction of
// ProblemInstance is not needed for the formulas themselves.

#include <cstdint>
#include <utility>
#include <vector>

#include "subo/dag.hpp"

namespace subo {

struct PairingGraphStats {
  std::uint64_t n = 0;
  std::uint64_t c = 0;
  std::uint64_t k = 0;
  BigInt lambda;
  BigInt alpha;
  BigInt beta;
  BigInt phi;
  BigInt edge_count;

  friend bool operator==(const PairingGraphStats&, const PairingGraphStats&) = default;
};

BigInt lambda_count(std::uint64_t n, std::uint64_t c);
BigInt alpha_count(std::uint64_t n, std::uint64_t c);
BigInt beta_count(std::uint64_t n, std::uint64_t c);
/// Bracketed form; 0 when K = 0 (a single parent has no partner).
BigInt phi_count(std::uint64_t n, std::uint64_t c);
/// The fully expanded form 2 prod_{i=0}^{K} (N - i) - K! ((N-K)(K-1) - 2). It does
/// not agree with phi_count (26 vs 0 at N=4, C=2) and is kept only for reporting.
BigInt phi_count_expanded(std::uint64_t n, std::uint64_t c);
BigInt edge_count(std::uint64_t n, std::uint64_t c);
PairingGraphStats closed_form_stats(std::uint64_t n, std::uint64_t c);

/// (K+1) (lambda (lambda-1) beta + beta (beta-1) lambda + K lambda^2 phi): the
/// ordered count of Type 1 and Type 2 edge pairs sharing a vertex.
BigInt dependency_structure_factor(std::uint64_t n, std::uint64_t c);

/// Probability that k fixed, distinct items all appear among m uniform draws
/// with replacement from a population of size t:
///   sum_{j=0}^{k} (-1)^j binom(k, j) (1 - j/t)^m.
/// Evaluated by a Stirling-number series when m k / t is small, where the
/// alternating sum cancels catastrophically. k is 1, 2 or 3.
double all_present_probability(unsigned k, double t, double m);

struct BoundProbabilityReport {
  double m = 0.0;
  double expected_q = 0.0;
  double nu = 0.0;
  double p_edge = 0.0;
  double p_triple = 0.0;
  double janson_lower = 0.0;
  double expected_coverage_lower = 0.0;
};

/// Everything below evaluated at once for an (N, C, m).
BoundProbabilityReport bound_probability(std::uint64_t n, std::uint64_t c, double m);

/// alpha beta (1 - 2(1 - 1/|T|)^m + (1 - 2/|T|)^m).
double expected_q(std::uint64_t n, std::uint64_t c, double m);
/// Structure factor times the exact three-trajectory inclusion probability.
double pairwise_dependency(std::uint64_t n, std::uint64_t c, double m);
/// max(0, 1 - min(exp(-E + nu/2), exp(-E^2 / (nu + E)))); 0 when E = 0.
double janson_lower_bound(double expected, double nu);
double janson_lower_bound(std::uint64_t n, std::uint64_t c, double m);
/// binom(N, C) * janson_lower_bound.
double expected_coverage_lower(std::uint64_t n, std::uint64_t c, double m);

/// (m, expected_coverage_lower / (m C)) for each m > 0. Ratios above 1 mean the
/// m C queries yield bounds on more terminals than a terminal-only learner sees.
std::vector<std::pair<double, double>> coverage_ratio_curve(std::uint64_t n, std::uint64_t c,
                                                            const std::vector<double>& m_list);

/// N (C-1)! (1 - (C-1)/N)^{2(C-1)} (1 - exp(-m / N^C)). Diagnostic only: the
/// asymptotic statement hides constants, so it is never compared against data.
double asymptotic_rate(std::uint64_t n, std::uint64_t c, double m);

/// BigInt to double, saturating at +inf.
double to_double(const BigInt& v);

}  // namespace subo
