#include "subo/combinatorics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace subo {

namespace {

void check_domain(std::uint64_t n, std::uint64_t c) {
  if (c < 1 || c > n) throw ConstraintError("counting formulas need 1 <= C <= N");
}

}  // namespace

double to_double(const BigInt& v) { return v.convert_to<double>(); }

BigInt lambda_count(std::uint64_t n, std::uint64_t c) {
  check_domain(n, c);
  const std::uint64_t k = c - 1;
  return factorial(k) * (n - k - 1);
}

BigInt alpha_count(std::uint64_t n, std::uint64_t c) {
  check_domain(n, c);
  const std::uint64_t k = c - 1;
  return factorial(k + 1) * (n - k - 1);
}

BigInt beta_count(std::uint64_t n, std::uint64_t c) {
  check_domain(n, c);
  const std::uint64_t k = c - 1;
  return falling_factorial(n, k) - factorial(k + 1);
}

BigInt phi_count(std::uint64_t n, std::uint64_t c) {
  check_domain(n, c);
  const std::uint64_t k = c - 1;
  if (k == 0) return 0;
  const BigInt bracket =
      binomial(n, k - 1) - BigInt(n - k) * k * (k - 1) / 2 - BigInt(k);
  return 2 * factorial(k - 1) * bracket;
}

BigInt phi_count_expanded(std::uint64_t n, std::uint64_t c) {
  check_domain(n, c);
  const std::uint64_t k = c - 1;
  const BigInt inner = BigInt(n - k) * (BigInt(k) - 1) - 2;
  return 2 * falling_factorial(n, k + 1) - factorial(k) * inner;
}

BigInt edge_count(std::uint64_t n, std::uint64_t c) { return alpha_count(n, c) * beta_count(n, c); }

PairingGraphStats closed_form_stats(std::uint64_t n, std::uint64_t c) {
  PairingGraphStats s;
  s.n = n;
  s.c = c;
  s.k = c - 1;
  s.lambda = lambda_count(n, c);
  s.alpha = alpha_count(n, c);
  s.beta = beta_count(n, c);
  s.phi = phi_count(n, c);
  s.edge_count = s.alpha * s.beta;
  return s;
}

BigInt dependency_structure_factor(std::uint64_t n, std::uint64_t c) {
  const BigInt l = lambda_count(n, c);
  const BigInt b = beta_count(n, c);
  const BigInt p = phi_count(n, c);
  const std::uint64_t k = c - 1;
  return BigInt(k + 1) * (l * (l - 1) * b + b * (b - 1) * l + BigInt(k) * l * l * p);
}

double all_present_probability(unsigned k, double t, double m) {
  if (k < 1 || k > 3) throw std::invalid_argument("all_present_probability: k must be 1, 2 or 3");
  if (t < k) throw std::invalid_argument("all_present_probability: population smaller than k");
  if (!(m >= 0.0)) throw std::invalid_argument("all_present_probability: m must be non-negative");
  if (m == 0.0) return 0.0;
  if (m * k / t < 1.0) {
    // sum_{i>=k} binom(m, i) (-1)^{i-k} k! S(i, k) / t^i, with
    // k! S(i, k) = sum_j (-1)^j binom(k, j) (k - j)^i.
    auto surjections = [k](long double i) -> long double {
      switch (k) {
        case 1: return 1.0L;
        case 2: return std::pow(2.0L, i) - 2.0L;
        default: return std::pow(3.0L, i) - 3.0L * std::pow(2.0L, i) + 3.0L;
      }
    };
    long double u = 1.0L;  // binom(m, i) / t^i
    const long double lm = m, lt = t;
    for (unsigned i = 0; i < k; ++i) u *= (lm - i) / ((i + 1) * lt);
    long double sum = 0.0L;
    for (unsigned i = k; i < 400; ++i) {
      if (u == 0.0L) break;
      const long double term = u * surjections(i);
      sum += ((i - k) % 2 == 0) ? term : -term;
      if (std::fabs(term) < 1e-22L * std::fabs(sum)) break;
      u *= (lm - i) / ((i + 1) * lt);
    }
    return static_cast<double>(sum);
  }
  // sum_j (-1)^j binom(k, j) (1 - j/t)^m; no severe cancellation at this range
  static constexpr int kBinom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
  long double sum = 0.0L;
  for (unsigned j = 0; j <= k; ++j) {
    const long double base = 1.0L - static_cast<long double>(j) / t;
    const long double power = base > 0.0L ? std::exp(m * std::log1p(-static_cast<long double>(j) / t))
                                          : std::pow(base, static_cast<long double>(m));
    sum += ((j % 2) ? -1.0L : 1.0L) * kBinom[k][j] * power;
  }
  return std::clamp(static_cast<double>(sum), 0.0, 1.0);
}

double janson_lower_bound(double expected, double nu) {
  if (!(expected > 0.0)) return 0.0;
  const double e1 = -expected + nu / 2.0;
  const double e2 = -expected * expected / (nu + expected);
  const double bound = -std::expm1(std::min(e1, e2));
  return std::clamp(bound, 0.0, 1.0);
}

BoundProbabilityReport bound_probability(std::uint64_t n, std::uint64_t c, double m) {
  BoundProbabilityReport r;
  r.m = m;
  const double t = to_double(falling_factorial(n, c));
  const double edges = to_double(edge_count(n, c));
  const double structure = to_double(dependency_structure_factor(n, c));
  r.p_edge = all_present_probability(2, t, m);
  r.p_triple = all_present_probability(3, t, m);
  r.expected_q = edges * r.p_edge;
  r.nu = structure * r.p_triple;
  r.janson_lower = janson_lower_bound(r.expected_q, r.nu);
  r.expected_coverage_lower = to_double(binomial(n, c)) * r.janson_lower;
  return r;
}

double expected_q(std::uint64_t n, std::uint64_t c, double m) {
  return bound_probability(n, c, m).expected_q;
}

double pairwise_dependency(std::uint64_t n, std::uint64_t c, double m) {
  return bound_probability(n, c, m).nu;
}

double janson_lower_bound(std::uint64_t n, std::uint64_t c, double m) {
  return bound_probability(n, c, m).janson_lower;
}

double expected_coverage_lower(std::uint64_t n, std::uint64_t c, double m) {
  return bound_probability(n, c, m).expected_coverage_lower;
}

std::vector<std::pair<double, double>> coverage_ratio_curve(std::uint64_t n, std::uint64_t c,
                                                            const std::vector<double>& m_list) {
  std::vector<std::pair<double, double>> out;
  out.reserve(m_list.size());
  for (double m : m_list) {
    if (!(m > 0.0)) throw std::invalid_argument("coverage_ratio_curve: m must be positive");
    out.emplace_back(m, expected_coverage_lower(n, c, m) / (m * static_cast<double>(c)));
  }
  return out;
}

double asymptotic_rate(std::uint64_t n, std::uint64_t c, double m) {
  check_domain(n, c);
  const double nn = static_cast<double>(n);
  const double k = static_cast<double>(c - 1);
  const double shrink = std::pow(1.0 - k / nn, 2.0 * k);
  const double saturation = -std::expm1(-m * std::exp(-static_cast<double>(c) * std::log(nn)));
  return nn * std::tgamma(k + 1.0) * shrink * saturation;
}

}  // namespace subo
