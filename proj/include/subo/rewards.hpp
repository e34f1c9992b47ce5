#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "subo/dag.hpp"

namespace subo {

/// A set function R over subsets of {0..N-1}.
class SetFunction {
 public:
  virtual ~SetFunction() = default;
  virtual double operator()(const StateSet& s) const = 0;
  virtual std::size_t num_elements() const = 0;
  /// Known global maximum of the function, if any. Used to clamp upper bounds.
  virtual std::optional<double> max_value() const { return std::nullopt; }
  /// If every value is an integer multiple of 1/q, returns q. Lets callers do
  /// reward arithmetic exactly instead of in rounded doubles.
  virtual std::optional<std::uint64_t> reward_denominator() const { return std::nullopt; }
};

/// Undirected simple graph stored as sorted neighbor lists.
class CoverageGraph {
 public:
  explicit CoverageGraph(std::size_t num_vertices = 0);

  /// Adds an undirected edge; self-loops and duplicates are ignored. Returns
  /// true if a new edge was inserted.
  bool add_edge(Element u, Element v);

  std::size_t num_vertices() const { return adjacency_.size(); }
  std::size_t num_edges() const { return num_edges_; }
  const std::vector<Element>& neighbors(Element v) const { return adjacency_.at(v); }
  std::size_t degree(Element v) const { return adjacency_.at(v).size(); }
  bool has_edge(Element u, Element v) const;
  /// Edges as (u, v) with u < v, sorted.
  std::vector<std::pair<Element, Element>> edges() const;

  friend bool operator==(const CoverageGraph&, const CoverageGraph&) = default;

 private:
  std::vector<std::vector<Element>> adjacency_;
  std::size_t num_edges_ = 0;
};

/// R(s) = |union of N(a) for a in s| / N. With closed_neighborhood, N[a] includes a.
class CoverageReward final : public SetFunction {
 public:
  explicit CoverageReward(const CoverageGraph& graph, bool closed_neighborhood = false);
  double operator()(const StateSet& s) const override;
  std::size_t num_elements() const override { return graph_->num_vertices(); }
  std::optional<double> max_value() const override { return 1.0; }
  std::optional<std::uint64_t> reward_denominator() const override {
    return graph_->num_vertices() ? std::optional<std::uint64_t>(graph_->num_vertices())
                                  : std::nullopt;
  }
  /// Number of covered vertices, the exact numerator of the reward.
  std::size_t covered_count(const StateSet& s) const;

 private:
  const CoverageGraph* graph_;
  bool closed_;
};

/// R(s) = offset + sum of weights. Modular, so the submodular upper bounds are tight.
class ModularReward final : public SetFunction {
 public:
  explicit ModularReward(std::vector<double> weights, double offset = 0.0);
  double operator()(const StateSet& s) const override;
  std::size_t num_elements() const override { return weights_.size(); }

 private:
  std::vector<double> weights_;
  double offset_;
};

/// Constant reward, e.g. R = 1 for uniform-target sanity checks.
class ConstantReward final : public SetFunction {
 public:
  ConstantReward(std::size_t n, double value) : n_(n), value_(value) {}
  double operator()(const StateSet&) const override { return value_; }
  std::size_t num_elements() const override { return n_; }
  std::optional<double> max_value() const override { return value_; }

 private:
  std::size_t n_;
  double value_;
};

/// G(n, p): each unordered pair is an edge independently with probability p.
CoverageGraph generate_er(std::size_t n, double edge_prob, std::uint64_t seed);

/// Preferential attachment. Vertices 0..m-1 form an initial clique; each later
/// vertex attaches to m distinct earlier vertices drawn without replacement
/// with probability proportional to degree. Edge count is m(m-1)/2 + m(n-m).
CoverageGraph generate_ba(std::size_t n, std::size_t attach_count, std::uint64_t seed);

/// Path graph 0 - 1 - ... - (n-1).
CoverageGraph path_graph(std::size_t n);

struct EdgeListParseError : std::runtime_error {
  EdgeListParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

struct LoadedGraph {
  CoverageGraph graph;
  std::vector<std::string> labels;  // labels[i] is the original label of vertex i
};

/// Parses a whitespace-separated edge list. Labels are re-indexed densely in
/// first-appearance order; '#' lines and blank lines are skipped.
LoadedGraph parse_edge_list(std::istream& in);
LoadedGraph load_edge_list(const std::filesystem::path& path);
void write_edge_list(std::ostream& out, const CoverageGraph& graph);

struct BudgetExhausted : std::runtime_error {
  BudgetExhausted() : std::runtime_error("query budget exhausted") {}
};

/// Budget-metered, caching front end to a reward function. Only distinct,
/// uncached evaluations are charged; the empty set is free.
class RewardOracle {
 public:
  RewardOracle(const SetFunction& reward, std::uint64_t query_budget);

  /// Throws BudgetExhausted if the state is uncached and the budget is spent.
  double metered_query(const StateSet& state);
  /// Cached value, if any; never charges.
  std::optional<double> cached(const StateSet& state) const;
  bool can_query(const StateSet& state) const;

  std::uint64_t queries_used() const { return queries_used_; }
  std::uint64_t query_budget() const { return query_budget_; }
  bool exhausted() const { return queries_used_ >= query_budget_; }
  const SetFunction& reward() const { return *reward_; }

 private:
  const SetFunction* reward_;
  std::uint64_t query_budget_;
  std::uint64_t queries_used_ = 0;
  std::unordered_map<StateSet, double, StateSetHash> cache_;
};

}  // namespace subo
