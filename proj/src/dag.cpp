#include "subo/dag.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace subo {

StateSet::StateSet(std::initializer_list<Element> elems) : StateSet(std::vector<Element>(elems)) {}

StateSet::StateSet(std::vector<Element> elems) : members_(std::move(elems)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

bool StateSet::contains(Element e) const {
  return std::binary_search(members_.begin(), members_.end(), e);
}

bool StateSet::is_subset_of(const StateSet& other) const {
  return std::includes(other.members_.begin(), other.members_.end(), members_.begin(),
                       members_.end());
}

StateSet StateSet::with(Element e) const {
  StateSet out;
  out.members_.reserve(members_.size() + 1);
  auto it = std::lower_bound(members_.begin(), members_.end(), e);
  out.members_.assign(members_.begin(), it);
  if (it == members_.end() || *it != e) out.members_.push_back(e);
  out.members_.insert(out.members_.end(), it, members_.end());
  return out;
}

StateSet StateSet::without(Element e) const {
  StateSet out;
  out.members_.reserve(members_.size());
  for (Element m : members_)
    if (m != e) out.members_.push_back(m);
  return out;
}

std::string StateSet::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (i) os << ' ';
    os << members_[i];
  }
  return os.str();
}

std::size_t StateSetHash::operator()(const StateSet& s) const noexcept {
  std::uint64_t h = 0x84222325cbf29ce4ULL ^ s.size();
  for (Element e : s) {
    h ^= e + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h);
}

ProblemInstance::ProblemInstance(std::size_t num_elements, std::size_t cardinality)
    : n_(num_elements), c_(cardinality) {
  if (c_ < 1) throw ConstraintError("cardinality must be at least 1");
  if (2 * c_ > n_)
    throw ConstraintError("cardinality " + std::to_string(c_) + " violates C <= N/2 for N = " +
                          std::to_string(n_));
}

Trajectory::Trajectory(const ProblemInstance& instance, std::vector<Element> additions)
    : additions_(std::move(additions)) {
  if (additions_.size() != instance.cardinality())
    throw std::invalid_argument("trajectory length must equal the cardinality");
  std::vector<Element> sorted = additions_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("trajectory adds an element twice");
  if (!sorted.empty() && sorted.back() >= instance.num_elements())
    throw std::invalid_argument("trajectory element out of range");
}

StateSet Trajectory::prefix(std::size_t t) const {
  if (t > additions_.size()) throw std::out_of_range("trajectory prefix index");
  return StateSet(std::vector<Element>(additions_.begin(), additions_.begin() + t));
}

std::vector<StateSet> Trajectory::prefixes() const {
  std::vector<StateSet> out;
  out.reserve(additions_.size() + 1);
  out.emplace_back();
  for (Element e : additions_) out.push_back(out.back().with(e));
  return out;
}

std::size_t TrajectoryHash::operator()(const Trajectory& t) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Element e : t.additions()) {
    h ^= e;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h);
}

std::vector<Element> available_actions(const ProblemInstance& instance, const StateSet& state) {
  if (state.size() >= instance.cardinality())
    throw std::logic_error("available_actions: state is terminating");
  std::vector<Element> out;
  out.reserve(instance.num_elements() - state.size());
  auto it = state.begin();
  for (Element e = 0; e < instance.num_elements(); ++e) {
    if (it != state.end() && *it == e) {
      ++it;
      continue;
    }
    out.push_back(e);
  }
  return out;
}

BigInt falling_factorial(std::uint64_t n, std::uint64_t k) {
  BigInt r = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    if (n < i) return 0;
    r *= (n - i);
  }
  return r;
}

BigInt factorial(std::uint64_t n) { return falling_factorial(n, n); }

BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r *= (n - k + i);
    r /= i;
  }
  return r;
}

std::uint64_t binomial_u64(std::uint64_t n, std::uint64_t k) {
  const BigInt b = binomial(n, k);
  if (b > std::numeric_limits<std::uint64_t>::max()) throw std::overflow_error("binomial overflow");
  return b.convert_to<std::uint64_t>();
}

BigInt count_trajectories(const ProblemInstance& instance) {
  return falling_factorial(instance.num_elements(), instance.cardinality());
}

// ---- enumeration ----------------------------------------------------------

TerminalStateRange::iterator::iterator(std::size_t n, std::size_t c) : n_(n), done_(false) {
  current_.resize(c);
  for (std::size_t i = 0; i < c; ++i) current_[i] = static_cast<Element>(i);
}

TerminalStateRange::iterator& TerminalStateRange::iterator::operator++() {
  const std::size_t c = current_.size();
  std::size_t i = c;
  while (i > 0) {
    --i;
    if (current_[i] < n_ - c + i) {
      ++current_[i];
      for (std::size_t j = i + 1; j < c; ++j) current_[j] = current_[j - 1] + 1;
      return *this;
    }
  }
  done_ = true;
  return *this;
}

TrajectoryRange::iterator::iterator(const ProblemInstance* instance)
    : instance_(instance), done_(false) {
  const std::size_t c = instance->cardinality();
  used_.assign(instance->num_elements(), 0);
  current_.resize(c);
  for (std::size_t i = 0; i < c; ++i) {
    current_[i] = static_cast<Element>(i);
    used_[i] = 1;
  }
}

// Advances position pos to its next unused value and fills the tail with the
// smallest unused values. Returns false when pos has no further value.
bool TrajectoryRange::iterator::advance_from(std::size_t pos) {
  const std::size_t n = instance_->num_elements();
  used_[current_[pos]] = 0;
  for (Element v = current_[pos] + 1; v < n; ++v) {
    if (used_[v]) continue;
    current_[pos] = v;
    used_[v] = 1;
    Element next = 0;
    for (std::size_t j = pos + 1; j < current_.size(); ++j) {
      while (used_[next]) ++next;
      current_[j] = next;
      used_[next] = 1;
    }
    return true;
  }
  return false;
}

TrajectoryRange::iterator& TrajectoryRange::iterator::operator++() {
  std::size_t pos = current_.size();
  while (pos > 0) {
    --pos;
    // release the tail before trying to advance this position
    for (std::size_t j = pos + 1; j < current_.size(); ++j) used_[current_[j]] = 0;
    if (advance_from(pos)) return *this;
  }
  done_ = true;
  return *this;
}

TerminalStateRange enumerate_terminating_states(const ProblemInstance& instance,
                                                std::uint64_t cap) {
  if (binomial(instance.num_elements(), instance.cardinality()) > cap)
    throw EnumerationCapExceeded("terminal state count exceeds enumeration cap");
  return TerminalStateRange(instance.num_elements(), instance.cardinality());
}

TrajectoryRange enumerate_trajectories(const ProblemInstance& instance, std::uint64_t cap) {
  if (count_trajectories(instance) > cap)
    throw EnumerationCapExceeded("trajectory count exceeds enumeration cap");
  return TrajectoryRange(instance);
}

// ---- ranking --------------------------------------------------------------

SubsetRanker::SubsetRanker(std::size_t n, std::size_t max_k) : n_(n), max_k_(max_k) {
  binom_.assign(n + 1, std::vector<std::uint64_t>(max_k + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) {
    binom_[i][0] = 1;
    for (std::size_t k = 1; k <= std::min(i, max_k); ++k) {
      const std::uint64_t a = binom_[i - 1][k - 1];
      const std::uint64_t b = (k <= i - 1) ? binom_[i - 1][k] : 0;
      if (a > UINT64_MAX - b) throw std::overflow_error("SubsetRanker: binomial overflow");
      binom_[i][k] = a + b;
    }
  }
}

std::uint64_t SubsetRanker::rank(std::span<const Element> sorted_members) const {
  std::uint64_t r = 0;
  for (std::size_t i = 0; i < sorted_members.size(); ++i) r += binom_[sorted_members[i]][i + 1];
  return r;
}

std::uint64_t SubsetRanker::rank_with(const StateSet& s, Element e) const {
  std::uint64_t r = 0;
  std::size_t pos = 0;
  bool placed = false;
  for (Element m : s) {
    if (!placed && e < m) {
      r += binom_[e][pos + 1];
      ++pos;
      placed = true;
    }
    r += binom_[m][pos + 1];
    ++pos;
  }
  if (!placed) r += binom_[e][pos + 1];
  return r;
}

StateSet SubsetRanker::unrank(std::uint64_t rank, std::size_t k) const {
  std::vector<Element> out(k);
  std::size_t hi = n_;
  for (std::size_t i = k; i > 0; --i) {
    // largest c < hi with binom(c, i) <= rank
    std::size_t c = hi;
    do {
      --c;
    } while (binom_[c][i] > rank);
    out[i - 1] = static_cast<Element>(c);
    rank -= binom_[c][i];
    hi = c;
  }
  return StateSet(std::move(out));
}

}  // namespace subo
