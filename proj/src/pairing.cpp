#include "subo/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_set>
#include <vector>

#include "subo/ledger.hpp"
#include "subo/rng.hpp"

namespace subo {

PairingRole classify_trajectory(std::span<const Element> additions, std::size_t c) {
  PairingRole role;
  const std::size_t k = c - 1;
  const bool ends_in_x =
      std::all_of(additions.begin(), additions.end(), [c](Element e) { return e < c; });
  if (ends_in_x) return role;
  // compatible with e_j when e_0..e_j all lie in x (j < K forced by not ending in x)
  for (std::size_t j = 0; j < k && additions[j] < c; ++j) role.compatible_mask |= 1u << additions[j];
  if (std::all_of(additions.begin(), additions.begin() + k, [c](Element e) { return e < c; })) {
    std::uint32_t seen = 0;
    for (std::size_t j = 0; j < k; ++j) seen |= 1u << additions[j];
    for (std::size_t a = 0; a < c; ++a)
      if (!(seen & (1u << a))) role.parent_of = static_cast<int>(a);
  }
  return role;
}

namespace {

template <class F>
void for_each_permutation(std::size_t n, std::size_t c, F&& visit) {
  std::vector<Element> current;
  std::vector<char> used(n, 0);
  current.reserve(c);
  auto rec = [&](auto&& self) -> void {
    if (current.size() == c) {
      visit(std::span<const Element>(current));
      return;
    }
    for (Element e = 0; e < n; ++e) {
      if (used[e]) continue;
      used[e] = 1;
      current.push_back(e);
      self(self);
      current.pop_back();
      used[e] = 0;
    }
  };
  rec(rec);
}

BigInt choose2(const BigInt& v) { return v * (v - 1) / 2; }

}  // namespace

PairingOracleStats oracle_pairing_stats(std::uint64_t n, std::uint64_t c, std::uint64_t cap) {
  if (c < 1 || c > n) throw ConstraintError("pairing oracle needs 1 <= C <= N");
  if (c > 31) throw std::invalid_argument("pairing oracle: C too large");
  if (falling_factorial(n, c) > cap)
    throw EnumerationCapExceeded("pairing oracle: trajectory count exceeds cap");

  std::vector<PairingRole> roles;
  std::vector<std::vector<Element>> paths;
  for_each_permutation(n, c, [&](std::span<const Element> t) {
    roles.push_back(classify_trajectory(t, c));
    paths.emplace_back(t.begin(), t.end());
  });

  std::vector<BigInt> lambda(c, 0), beta(c, 0);
  for (const auto& r : roles) {
    if (r.parent_of >= 0) lambda[r.parent_of] += 1;
    for (std::size_t a = 0; a < c; ++a)
      if (r.compatible_mask & (1u << a)) beta[a] += 1;
  }

  PairingOracleStats out;
  out.symmetric = std::all_of(lambda.begin(), lambda.end(), [&](const BigInt& v) { return v == lambda[0]; }) &&
                  std::all_of(beta.begin(), beta.end(), [&](const BigInt& v) { return v == beta[0]; });

  // restricted and full pairwise intersections of compatible sets
  BigInt phi_first = -1, phi_full_first = -1;
  BigInt type2 = 0;
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = a + 1; b < c; ++b) {
      BigInt phi = 0, phi_full = 0;
      const std::uint32_t both = (1u << a) | (1u << b);
      for (const auto& r : roles) {
        if ((r.compatible_mask & both) != both) continue;
        phi_full += 1;
        if (r.parent_of < 0) phi += 1;
      }
      if (phi_first < 0) {
        phi_first = phi;
        phi_full_first = phi_full;
      } else if (phi != phi_first || phi_full != phi_full_first) {
        out.symmetric = false;
      }
      type2 += lambda[a] * lambda[b] * phi;
    }
  }

  BigInt type1 = 0, edges = 0, alpha = 0;
  for (std::size_t a = 0; a < c; ++a) {
    type1 += choose2(lambda[a]) * beta[a] + choose2(beta[a]) * lambda[a];
    edges += lambda[a] * beta[a];
    alpha += lambda[a];
  }

  // shared-endpoint pairs: sum over vertices of binom(deg, 2), minus pairs that
  // share both endpoints (counted once at each end)
  BigInt by_vertex = 0;
  for (const auto& r : roles) {
    BigInt deg = 0;
    if (r.parent_of >= 0) deg += beta[r.parent_of];
    for (std::size_t a = 0; a < c; ++a)
      if (r.compatible_mask & (1u << a)) deg += lambda[a];
    by_vertex += choose2(deg);
  }
  std::vector<std::size_t> parent_trajs;
  for (std::size_t i = 0; i < roles.size(); ++i)
    if (roles[i].parent_of >= 0) parent_trajs.push_back(i);
  BigInt double_shared_ordered = 0;
  for (std::size_t i : parent_trajs)
    for (std::size_t j : parent_trajs) {
      const auto a = static_cast<std::uint32_t>(roles[i].parent_of);
      const auto b = static_cast<std::uint32_t>(roles[j].parent_of);
      if (a == b) continue;
      if ((roles[j].compatible_mask & (1u << a)) && (roles[i].compatible_mask & (1u << b)))
        double_shared_ordered += 1;
    }

  out.stats.n = n;
  out.stats.c = c;
  out.stats.k = c - 1;
  out.stats.lambda = lambda[0];
  out.stats.alpha = alpha;
  out.stats.beta = beta[0];
  out.stats.phi = c >= 2 ? phi_first : BigInt(0);
  out.stats.edge_count = edges;
  out.phi_unrestricted = c >= 2 ? phi_full_first : BigInt(0);
  out.type1_pairs = type1;
  out.type2_pairs = type2;
  out.shared_vertex_pairs = by_vertex - double_shared_ordered / 2;
  out.double_shared_pairs = double_shared_ordered / 2;
  return out;
}

double janson_lower_bound_full(const PairingOracleStats& oracle, double m) {
  const double t = to_double(falling_factorial(oracle.stats.n, oracle.stats.c));
  const double p_edge = all_present_probability(2, t, m);
  const double p_triple = all_present_probability(3, t, m);
  const double one_endpoint = to_double(oracle.shared_vertex_pairs - oracle.double_shared_pairs);
  const double both_endpoints = to_double(oracle.double_shared_pairs);
  const double nu = 2.0 * (one_endpoint * p_triple + both_endpoints * p_edge);
  return janson_lower_bound(to_double(oracle.stats.edge_count) * p_edge, nu);
}

namespace {

struct RepOutcome {
  double q = 0.0;
  double positive = 0.0;
  double coverage = 0.0;
  double usable = 0.0;
};

struct VectorHash {
  std::size_t operator()(const std::vector<Element>& v) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Element e : v) h = (h ^ e) * 0x100000001b3ULL;
    return static_cast<std::size_t>(h);
  }
};

RepOutcome run_repetition(const ProblemInstance& inst, std::uint64_t m, std::uint64_t stream) {
  const std::size_t n = inst.num_elements();
  const std::size_t c = inst.cardinality();
  Rng rng(stream);
  std::vector<Element> pool(n);
  std::unordered_set<std::vector<Element>, VectorHash> sampled;
  for (std::uint64_t i = 0; i < m; ++i) {
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t j = 0; j < c; ++j) std::swap(pool[j], pool[j + uniform_index(rng, n - j)]);
    sampled.emplace(pool.begin(), pool.begin() + c);
  }

  std::vector<double> parents(c, 0.0), compatibles(c, 0.0);
  ObservationLedger ledger(inst);
  BoundConfig cfg;
  cfg.clamp_to_max = false;
  cfg.exclude_observed = false;
  BoundIndex index(inst, cfg);
  for (const auto& t : sampled) {
    const PairingRole role = classify_trajectory(t, c);
    if (role.parent_of >= 0) parents[role.parent_of] += 1.0;
    for (std::size_t a = 0; a < c; ++a)
      if (role.compatible_mask & (1u << a)) compatibles[a] += 1.0;
    StateSet s;
    record_observation(ledger, index, s, 0.0);
    for (Element e : t) {
      s = s.with(e);
      record_observation(ledger, index, s, 0.0);
    }
  }
  RepOutcome out;
  for (std::size_t a = 0; a < c; ++a) out.q += parents[a] * compatibles[a];
  out.positive = out.q > 0.0 ? 1.0 : 0.0;
  out.coverage = static_cast<double>(index.size());
  std::size_t usable = 0;
  for (const auto& e : index.entries())
    if (!ledger.terminal_observed(e.terminal)) ++usable;
  out.usable = static_cast<double>(usable);
  return out;
}

McEstimate summarize(const std::vector<double>& xs) {
  McEstimate est;
  if (xs.empty()) return est;
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  est.mean = sum / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - est.mean) * (x - est.mean);
    est.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return est;
}

}  // namespace

McResult mc_bound_experiment(std::uint64_t n, std::uint64_t c, std::uint64_t m,
                             std::uint64_t repetitions, std::uint64_t seed, unsigned threads) {
  const ProblemInstance inst(n, c);
  if (c > 31) throw std::invalid_argument("mc_bound_experiment: C too large");
  if (count_trajectories(inst) > kDefaultTrajectoryCap)
    throw EnumerationCapExceeded("mc_bound_experiment: instance exceeds the enumeration cap");

  std::vector<RepOutcome> outcomes(repetitions);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(repetitions, 1)));
  auto work = [&](unsigned worker) {
    for (std::uint64_t rep = worker; rep < repetitions; rep += threads)
      outcomes[rep] = run_repetition(inst, m, derive_seed(seed, rep));
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  std::vector<double> q, pos, cov, usable;
  q.reserve(repetitions);
  pos.reserve(repetitions);
  cov.reserve(repetitions);
  usable.reserve(repetitions);
  for (const auto& o : outcomes) {
    q.push_back(o.q);
    pos.push_back(o.positive);
    cov.push_back(o.coverage);
    usable.push_back(o.usable);
  }
  McResult r;
  r.m = static_cast<double>(m);
  r.repetitions = repetitions;
  r.q = summarize(q);
  r.p_positive = summarize(pos);
  r.coverage = summarize(cov);
  r.usable_coverage = summarize(usable);
  return r;
}

}  // namespace subo
