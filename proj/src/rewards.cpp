#include "subo/rewards.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "subo/rng.hpp"

namespace subo {

CoverageGraph::CoverageGraph(std::size_t num_vertices) : adjacency_(num_vertices) {}

bool CoverageGraph::add_edge(Element u, Element v) {
  if (u == v) return false;
  const std::size_t need = std::max(u, v) + std::size_t{1};
  if (need > adjacency_.size()) adjacency_.resize(need);
  auto& nu = adjacency_[u];
  auto it = std::lower_bound(nu.begin(), nu.end(), v);
  if (it != nu.end() && *it == v) return false;
  nu.insert(it, v);
  auto& nv = adjacency_[v];
  nv.insert(std::lower_bound(nv.begin(), nv.end(), u), u);
  ++num_edges_;
  return true;
}

bool CoverageGraph::has_edge(Element u, Element v) const {
  if (u >= adjacency_.size()) return false;
  const auto& nu = adjacency_[u];
  return std::binary_search(nu.begin(), nu.end(), v);
}

std::vector<std::pair<Element, Element>> CoverageGraph::edges() const {
  std::vector<std::pair<Element, Element>> out;
  out.reserve(num_edges_);
  for (Element u = 0; u < adjacency_.size(); ++u)
    for (Element v : adjacency_[u])
      if (u < v) out.emplace_back(u, v);
  return out;
}

CoverageReward::CoverageReward(const CoverageGraph& graph, bool closed_neighborhood)
    : graph_(&graph), closed_(closed_neighborhood) {}

double CoverageReward::operator()(const StateSet& s) const {
  const std::size_t n = graph_->num_vertices();
  if (n == 0) return 0.0;
  return static_cast<double>(covered_count(s)) / static_cast<double>(n);
}

std::size_t CoverageReward::covered_count(const StateSet& s) const {
  const std::size_t n = graph_->num_vertices();
  if (n == 0 || s.empty()) return 0;
  // Stamp-based marking avoids clearing a scratch array on every call.
  thread_local std::vector<std::uint32_t> stamp;
  thread_local std::uint32_t epoch = 0;
  if (stamp.size() < n) stamp.assign(n, 0);
  if (++epoch == 0) {
    std::fill(stamp.begin(), stamp.end(), 0);
    epoch = 1;
  }
  std::size_t covered = 0;
  auto mark = [&](Element v) {
    if (stamp[v] != epoch) {
      stamp[v] = epoch;
      ++covered;
    }
  };
  for (Element a : s) {
    if (a >= n) throw std::out_of_range("coverage_reward: vertex index out of range");
    if (closed_) mark(a);
    for (Element v : graph_->neighbors(a)) mark(v);
  }
  return covered;
}

ModularReward::ModularReward(std::vector<double> weights, double offset)
    : weights_(std::move(weights)), offset_(offset) {}

double ModularReward::operator()(const StateSet& s) const {
  double total = offset_;
  for (Element a : s) total += weights_.at(a);
  return total;
}

CoverageGraph generate_er(std::size_t n, double edge_prob, std::uint64_t seed) {
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0))
    throw std::invalid_argument("generate_er: edge probability must lie in [0, 1]");
  Rng rng(seed);
  CoverageGraph g(n);
  for (Element u = 0; u < n; ++u)
    for (Element v = u + 1; v < n; ++v)
      if (bernoulli(rng, edge_prob)) g.add_edge(u, v);
  return g;
}

CoverageGraph generate_ba(std::size_t n, std::size_t attach_count, std::uint64_t seed) {
  if (attach_count < 1 || attach_count >= n)
    throw std::invalid_argument("generate_ba: need 1 <= attach_count < n");
  Rng rng(seed);
  CoverageGraph g(n);
  const std::size_t m = attach_count;
  // endpoint multiset: vertex v appears degree(v) times
  std::vector<Element> endpoints;
  for (Element u = 0; u < m; ++u)
    for (Element v = u + 1; v < m; ++v) {
      g.add_edge(u, v);
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  std::vector<Element> targets;
  for (Element v = static_cast<Element>(m); v < n; ++v) {
    targets.clear();
    while (targets.size() < m) {
      Element t = 0;
      if (endpoints.empty()) {
        // only possible when m == 1 and the core has no edges yet
        t = static_cast<Element>(uniform_index(rng, v));
      } else {
        t = endpoints[uniform_index(rng, endpoints.size())];
      }
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (Element t : targets) {
      g.add_edge(v, t);
      endpoints.push_back(v);
      endpoints.push_back(t);
    }
  }
  return g;
}

CoverageGraph path_graph(std::size_t n) {
  CoverageGraph g(n);
  for (Element v = 0; v + 1 < n; ++v) g.add_edge(v, v + 1);
  return g;
}

LoadedGraph parse_edge_list(std::istream& in) {
  std::unordered_map<std::string, Element> index;
  LoadedGraph out;
  std::vector<std::pair<Element, Element>> pending;
  auto intern = [&](const std::string& label) {
    auto [it, inserted] = index.emplace(label, static_cast<Element>(out.labels.size()));
    if (inserted) out.labels.push_back(label);
    return it->second;
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    std::istringstream fields(line);
    std::string a, b, extra;
    if (!(fields >> a >> b)) throw EdgeListParseError("expected two vertex labels", line_no);
    if (fields >> extra) throw EdgeListParseError("unexpected extra field '" + extra + "'", line_no);
    const Element u = intern(a);
    const Element v = intern(b);
    pending.emplace_back(u, v);
  }
  if (out.labels.empty()) throw EdgeListParseError("edge list is empty", line_no);
  out.graph = CoverageGraph(out.labels.size());
  for (auto [u, v] : pending) out.graph.add_edge(u, v);
  return out;
}

LoadedGraph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list: " + path.string());
  return parse_edge_list(in);
}

void write_edge_list(std::ostream& out, const CoverageGraph& graph) {
  for (auto [u, v] : graph.edges()) out << u << ' ' << v << '\n';
}

RewardOracle::RewardOracle(const SetFunction& reward, std::uint64_t query_budget)
    : reward_(&reward), query_budget_(query_budget) {}

std::optional<double> RewardOracle::cached(const StateSet& state) const {
  if (state.empty()) return (*reward_)(state);
  auto it = cache_.find(state);
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

bool RewardOracle::can_query(const StateSet& state) const {
  return state.empty() || cache_.contains(state) || queries_used_ < query_budget_;
}

double RewardOracle::metered_query(const StateSet& state) {
  if (state.empty()) return (*reward_)(state);
  if (auto it = cache_.find(state); it != cache_.end()) return it->second;
  if (queries_used_ >= query_budget_) throw BudgetExhausted();
  const double r = (*reward_)(state);
  ++queries_used_;
  cache_.emplace(state, r);
  return r;
}

}  // namespace subo
