#pragma once

// Enumeration and Monte Carlo oracles for the trajectory-pairing graph of the
// fixed terminal x = {0, ..., C-1}.
//
// A trajectory is a parent trajectory of a in x if its first K additions are
// exactly x \ {a} and it does not end in x. It is compatible with a if a is
// added right after a prefix contained in x \ {a} and it does not end in x.
// Edges are labeled triples (a, parent trajectory, compatible trajectory).

#include <cstdint>
#include <span>

#include "subo/combinatorics.hpp"
#include "subo/dag.hpp"

namespace subo {

inline constexpr std::uint64_t kDefaultPairingCap = 100'000;

struct PairingOracleStats {
  /// lambda, beta, phi per parent (pair), checked identical across parents.
  PairingGraphStats stats;
  /// |compatible(a) ∩ compatible(b)| without removing trajectories through a parent.
  BigInt phi_unrestricted;
  /// Unordered Type 1 pairs: two edges of one parent sharing an endpoint.
  BigInt type1_pairs;
  /// Unordered Type 2 pairs: edges of two parents sharing an endpoint in the
  /// restricted intersection.
  BigInt type2_pairs;
  /// Every unordered pair of distinct edges that share at least one endpoint.
  BigInt shared_vertex_pairs;
  /// Unordered pairs of distinct edges on the same two trajectories (labels a != b).
  BigInt double_shared_pairs;
  /// Per-parent and per-pair counts came out identical for every choice.
  bool symmetric = true;
};

/// Exhaustive classification of all N!/(N-C)! trajectories. Accepts any
/// 1 <= C <= N; throws EnumerationCapExceeded above `cap` trajectories.
PairingOracleStats oracle_pairing_stats(std::uint64_t n, std::uint64_t c,
                                        std::uint64_t cap = kDefaultPairingCap);

/// Janson bound with the dependency sum taken over every dependent edge pair
/// found by the oracle: pairs sharing one endpoint weigh p_triple, pairs on the
/// same two endpoints weigh p_edge. Diagnostic companion to janson_lower_bound.
double janson_lower_bound_full(const PairingOracleStats& oracle, double m);

/// Classification of one trajectory relative to x = {0..C-1}.
struct PairingRole {
  int parent_of = -1;              // a such that the trajectory is a parent trajectory of a
  std::uint32_t compatible_mask = 0;  // bit a set when compatible with a
};
PairingRole classify_trajectory(std::span<const Element> additions, std::size_t c);

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

struct McResult {
  double m = 0.0;
  std::uint64_t repetitions = 0;
  /// Q: edges of G(x) whose endpoints were both sampled.
  McEstimate q;
  /// Indicator Q > 0.
  McEstimate p_positive;
  /// kappa: terminals with at least one bound derivable from the sampled
  /// ledger, counting terminals that were also observed directly.
  McEstimate coverage;
  /// kappa restricted to terminals not observed directly.
  McEstimate usable_coverage;
};

/// Samples m trajectories uniformly with replacement per repetition. Each
/// repetition draws from its own stream derive_seed(seed, rep), so results do
/// not depend on the thread count. threads = 0 uses the hardware concurrency.
McResult mc_bound_experiment(std::uint64_t n, std::uint64_t c, std::uint64_t m,
                             std::uint64_t repetitions, std::uint64_t seed,
                             unsigned threads = 1);

}  // namespace subo
