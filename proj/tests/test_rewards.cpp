#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "subo/rewards.hpp"
#include "subo/rng.hpp"

using namespace subo;

namespace {

// Independent reference: explicit std::set union of open neighborhoods.
double reference_coverage(const CoverageGraph& g, const StateSet& s, bool closed) {
  std::set<Element> covered;
  for (Element a : s) {
    if (closed) covered.insert(a);
    for (Element v : g.neighbors(a)) covered.insert(v);
  }
  return static_cast<double>(covered.size()) / static_cast<double>(g.num_vertices());
}

StateSet random_subset(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<Element> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + uniform_index(rng, n - i)]);
  return StateSet(std::vector<Element>(all.begin(), all.begin() + k));
}

}  // namespace

TEST_CASE("coverage on a path graph") {
  auto g = path_graph(4);
  CoverageReward r(g);
  CHECK_EQ(r(StateSet{1}), 0.5);
  CHECK_EQ(r(StateSet{1, 2}), 1.0);
  CHECK_EQ(r(StateSet{}), 0.0);
  CHECK_EQ(r(StateSet{0}), 0.25);
  CoverageReward closed(g, true);
  CHECK_EQ(closed(StateSet{0}), 0.5);
  CHECK_EQ(r.max_value(), 1.0);
}

TEST_CASE("graph is undirected without self-loops") {
  CoverageGraph g(3);
  CHECK(g.add_edge(0, 1));
  CHECK_FALSE(g.add_edge(1, 0));
  CHECK_FALSE(g.add_edge(2, 2));
  CHECK(g.has_edge(1, 0));
  CHECK_EQ(g.num_edges(), 1u);
  auto er = generate_er(50, 0.2, 11);
  for (Element u = 0; u < 50; ++u) {
    CHECK_FALSE(er.has_edge(u, u));
    for (Element v : er.neighbors(u)) CHECK(er.has_edge(v, u));
  }
}

TEST_CASE("erdos-renyi extremes and determinism") {
  CHECK_EQ(generate_er(10, 0.0, 1).num_edges(), 0u);
  CHECK_EQ(generate_er(10, 1.0, 1).num_edges(), 45u);
  CHECK(generate_er(40, 0.3, 5) == generate_er(40, 0.3, 5));
  CHECK_FALSE(generate_er(40, 0.3, 5) == generate_er(40, 0.3, 6));
  CHECK_THROWS_AS(generate_er(10, 1.5, 1), std::invalid_argument);
}

TEST_CASE("erdos-renyi mean edge count over 100 seeds") {
  // Each graph's edge count is Binomial(binom(1000,2), p); the mean of 100
  // graphs has sd sqrt(M p (1-p) / 100).
  const double pairs = 1000.0 * 999.0 / 2.0;
  const double p = 0.005;
  const double expected = p * pairs;  // 2497.5
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    total += static_cast<double>(generate_er(1000, p, seed).num_edges());
  const double mean = total / 100.0;
  const double sd = std::sqrt(pairs * p * (1 - p) / 100.0);
  CHECK(std::abs(mean - expected) <= 3 * sd);
}

TEST_CASE("barabasi-albert edge counts") {
  auto g = generate_ba(100, 3, 7);
  CHECK_EQ(g.num_edges(), 3u * 97u + 3u);
  auto small = generate_ba(5, 4, 1);
  CHECK_EQ(small.num_edges(), 6u + 4u);
  // connected: every non-core vertex links into earlier vertices
  for (Element v = 0; v < 5; ++v) CHECK(small.degree(v) >= 1);
  CHECK_EQ(generate_ba(30, 1, 3).num_edges(), 29u);
  CHECK_THROWS_AS(generate_ba(5, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_ba(5, 0, 1), std::invalid_argument);
  CHECK(generate_ba(200, 3, 9) == generate_ba(200, 3, 9));
}

TEST_CASE("barabasi-albert degrees are heavy-tailed") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto g = generate_ba(1000, 3, seed);
    std::vector<std::size_t> deg(1000);
    for (Element v = 0; v < 1000; ++v) deg[v] = g.degree(v);
    std::sort(deg.begin(), deg.end());
    const double median = 0.5 * static_cast<double>(deg[499] + deg[500]);
    CHECK(static_cast<double>(deg.back()) > 3.0 * median);
  }
}

TEST_CASE("edge list parsing") {
  {
    std::istringstream in("0 1\n1 2");
    auto lg = parse_edge_list(in);
    CHECK_EQ(lg.graph.num_vertices(), 3u);
    CHECK_EQ(lg.graph.num_edges(), 2u);
  }
  {
    std::istringstream in("# header\n\n  # indented comment\na b\r\nb c\n");
    auto lg = parse_edge_list(in);
    CHECK_EQ(lg.graph.num_vertices(), 3u);
    CHECK_EQ(lg.labels, std::vector<std::string>{"a", "b", "c"});
  }
  {
    std::istringstream in("5 7\n7 5\n5 5");
    auto lg = parse_edge_list(in);
    CHECK_EQ(lg.graph.num_vertices(), 2u);
    CHECK_EQ(lg.graph.num_edges(), 1u);
    CHECK_EQ(lg.labels[0], "5");
  }
  {
    std::istringstream in("0 1\n2\n");
    try {
      parse_edge_list(in);
      FAIL("expected a parse error");
    } catch (const EdgeListParseError& e) {
      CHECK_EQ(e.line_number, 2u);
    }
  }
  {
    std::istringstream in("0 1 2\n");
    CHECK_THROWS_AS(parse_edge_list(in), EdgeListParseError);
  }
  {
    std::istringstream in("# only a comment\n");
    CHECK_THROWS_AS(parse_edge_list(in), EdgeListParseError);
  }
  CHECK_THROWS(load_edge_list("/nonexistent/edges.txt"));
}

TEST_CASE("edge list round trip") {
  auto g = generate_er(30, 0.4, 3);
  std::ostringstream out;
  write_edge_list(out, g);
  std::istringstream in(out.str());
  auto lg = parse_edge_list(in);
  // labels are re-indexed by first appearance; map back before comparing
  REQUIRE_EQ(lg.graph.num_edges(), g.num_edges());
  for (auto [u, v] : lg.graph.edges())
    CHECK(g.has_edge(static_cast<Element>(std::stoul(lg.labels[u])),
                     static_cast<Element>(std::stoul(lg.labels[v]))));
}

TEST_CASE("coverage matches the reference union") {
  Rng rng(17);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto g = generate_ba(40, 2, seed);
    CoverageReward open(g), closed(g, true);
    for (int t = 0; t < 200; ++t) {
      StateSet s = random_subset(rng, 40, uniform_index(rng, 8));
      CHECK_EQ(open(s), reference_coverage(g, s, false));
      CHECK_EQ(closed(s), reference_coverage(g, s, true));
    }
  }
}

TEST_CASE("coverage is monotone and submodular") {
  std::vector<CoverageGraph> graphs;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    graphs.push_back((seed % 2) ? generate_er(30, 0.1, seed) : generate_ba(30, 2, seed));
  Rng rng(2024);
  std::size_t violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    CoverageReward r(graphs[uniform_index(rng, graphs.size())]);
    StateSet big = random_subset(rng, 30, 1 + uniform_index(rng, 10));
    std::vector<Element> keep;
    for (Element e : big)
      if (bernoulli(rng, 0.5)) keep.push_back(e);
    StateSet small(keep);
    Element a = 0;
    do {
      a = static_cast<Element>(uniform_index(rng, 30));
    } while (big.contains(a));
    // rewards are k/N; compare the integer numerators so the check is exact
    const auto k = [&](const StateSet& s) { return static_cast<long>(r.covered_count(s)); };
    if (k(small.with(a)) - k(small) < k(big.with(a)) - k(big)) ++violations;
    if (k(small) > k(big)) ++violations;
    if (r(small) > r(big)) ++violations;
  }
  CHECK_EQ(violations, 0u);
}

TEST_CASE("full vertex set of a connected graph is fully covered") {
  auto g = path_graph(7);
  std::vector<Element> all(7);
  std::iota(all.begin(), all.end(), 0);
  CHECK_EQ(CoverageReward(g)(StateSet(all)), 1.0);
}

TEST_CASE("modular reward") {
  ModularReward r({0.1, 0.2, 0.4}, 1.0);
  CHECK(r(StateSet{0, 2}) == doctest::Approx(1.5));
  CHECK_EQ(r(StateSet{}), 1.0);
  CHECK_FALSE(r.max_value().has_value());
}

TEST_CASE("metered oracle accounting") {
  auto g = path_graph(6);
  CoverageReward r(g);
  {
    RewardOracle oracle(r, 10);
    oracle.metered_query(StateSet{1});
    oracle.metered_query(StateSet{1});
    CHECK_EQ(oracle.queries_used(), 1u);
    oracle.metered_query(StateSet{});
    CHECK_EQ(oracle.queries_used(), 1u);
  }
  {
    RewardOracle oracle(r, 2);
    oracle.metered_query(StateSet{0});
    oracle.metered_query(StateSet{1});
    CHECK(oracle.exhausted());
    CHECK_THROWS_AS(oracle.metered_query(StateSet{2}), BudgetExhausted);
    CHECK_EQ(oracle.queries_used(), 2u);
    // cached and empty states remain free after exhaustion
    CHECK_EQ(oracle.metered_query(StateSet{0}), r(StateSet{0}));
    CHECK_EQ(oracle.metered_query(StateSet{}), 0.0);
    CHECK_FALSE(oracle.can_query(StateSet{3}));
    CHECK(oracle.can_query(StateSet{1}));
  }
  {
    // one trajectory with all-new prefixes costs C queries
    ProblemInstance inst(6, 3);
    Trajectory t(inst, {2, 0, 5});
    RewardOracle oracle(r, 100);
    for (const auto& s : t.prefixes()) oracle.metered_query(s);
    CHECK_EQ(oracle.queries_used(), 3u);
    CHECK_EQ(oracle.cached(StateSet{0, 2}), r(StateSet{0, 2}));
    CHECK_FALSE(oracle.cached(StateSet{4}).has_value());
  }
}
