#pragma once

// Set-construction DAG: states are subsets of {0..N-1}, an action adds one
// element, and a trajectory adds exactly C elements starting from the empty set.

#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace subo {

using Element = std::uint32_t;
using BigInt = boost::multiprecision::cpp_int;

struct ConstraintError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EnumerationCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Canonical subset of element indices. Members are kept sorted and unique, so
/// equality, ordering and hashing are set semantics regardless of insertion order.
class StateSet {
 public:
  StateSet() = default;
  StateSet(std::initializer_list<Element> elems);
  explicit StateSet(std::vector<Element> elems);

  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool contains(Element e) const;
  bool is_subset_of(const StateSet& other) const;
  bool is_proper_subset_of(const StateSet& other) const {
    return size() < other.size() && is_subset_of(other);
  }

  StateSet with(Element e) const;
  StateSet without(Element e) const;

  std::span<const Element> members() const { return members_; }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  /// Space-separated sorted indices, e.g. "0 2 5"; empty string for the empty set.
  std::string to_string() const;

  friend bool operator==(const StateSet&, const StateSet&) = default;
  friend auto operator<=>(const StateSet& a, const StateSet& b) {
    if (a.size() != b.size()) return a.size() <=> b.size();
    return a.members_ <=> b.members_;
  }

 private:
  std::vector<Element> members_;
};

struct StateSetHash {
  std::size_t operator()(const StateSet& s) const noexcept;
};

class ProblemInstance {
 public:
  /// Throws ConstraintError unless 1 <= cardinality <= num_elements / 2.
  ProblemInstance(std::size_t num_elements, std::size_t cardinality);

  std::size_t num_elements() const { return n_; }
  std::size_t cardinality() const { return c_; }
  /// Size of a parent state, C - 1.
  std::size_t parent_size() const { return c_ - 1; }

  bool is_terminal(const StateSet& s) const { return s.size() == c_; }

 private:
  std::size_t n_;
  std::size_t c_;
};

/// Ordered additions from the empty set to a terminating state.
class Trajectory {
 public:
  Trajectory() = default;
  /// Validates length C, distinct additions and index range.
  Trajectory(const ProblemInstance& instance, std::vector<Element> additions);

  std::span<const Element> additions() const { return additions_; }
  std::size_t length() const { return additions_.size(); }
  /// The C + 1 states s_0 = {} ... s_C = terminal.
  std::vector<StateSet> prefixes() const;
  StateSet prefix(std::size_t t) const;
  StateSet terminal() const { return prefix(additions_.size()); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
  friend auto operator<=>(const Trajectory&, const Trajectory&) = default;

 private:
  std::vector<Element> additions_;
};

struct TrajectoryHash {
  std::size_t operator()(const Trajectory& t) const noexcept;
};

/// A(s) = A \ s. Throws std::logic_error when s is already terminating.
std::vector<Element> available_actions(const ProblemInstance& instance, const StateSet& state);

/// N! / (N - C)!, exact.
BigInt count_trajectories(const ProblemInstance& instance);

/// Exact binomial coefficient.
BigInt binomial(std::uint64_t n, std::uint64_t k);
/// Binomial coefficient as uint64; throws std::overflow_error if it does not fit.
std::uint64_t binomial_u64(std::uint64_t n, std::uint64_t k);
/// Falling factorial n (n-1) ... (n-k+1), exact.
BigInt falling_factorial(std::uint64_t n, std::uint64_t k);
BigInt factorial(std::uint64_t n);

inline constexpr std::uint64_t kDefaultTerminalCap = 10'000'000;
inline constexpr std::uint64_t kDefaultTrajectoryCap = 10'000'000;

/// Lexicographic sweep over all C-subsets. Iteration yields StateSet values.
class TerminalStateRange {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = StateSet;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(std::size_t n, std::size_t c);
    StateSet operator*() const { return StateSet(current_); }
    iterator& operator++();
    void operator++(int) { ++*this; }
    bool operator==(const iterator& o) const { return done_ == o.done_; }

   private:
    std::size_t n_ = 0;
    std::vector<Element> current_;
    bool done_ = true;
  };

  iterator begin() const { return iterator(n_, c_); }
  iterator end() const { return iterator(); }

 private:
  friend TerminalStateRange enumerate_terminating_states(const ProblemInstance&, std::uint64_t);
  TerminalStateRange(std::size_t n, std::size_t c) : n_(n), c_(c) {}
  std::size_t n_;
  std::size_t c_;
};

/// Lexicographic sweep over all ordered C-permutations of the elements.
class TrajectoryRange {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Trajectory;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const ProblemInstance* instance);
    Trajectory operator*() const { return Trajectory(*instance_, current_); }
    iterator& operator++();
    void operator++(int) { ++*this; }
    bool operator==(const iterator& o) const { return done_ == o.done_; }

   private:
    bool advance_from(std::size_t pos);
    const ProblemInstance* instance_ = nullptr;
    std::vector<Element> current_;
    std::vector<char> used_;
    bool done_ = true;
  };

  iterator begin() const { return iterator(&instance_); }
  iterator end() const { return iterator(); }

 private:
  friend TrajectoryRange enumerate_trajectories(const ProblemInstance&, std::uint64_t);
  explicit TrajectoryRange(ProblemInstance instance) : instance_(instance) {}
  ProblemInstance instance_;
};

/// Throws EnumerationCapExceeded when binom(N, C) > cap.
TerminalStateRange enumerate_terminating_states(const ProblemInstance& instance,
                                                std::uint64_t cap = kDefaultTerminalCap);
/// Throws EnumerationCapExceeded when N!/(N-C)! > cap.
TrajectoryRange enumerate_trajectories(const ProblemInstance& instance,
                                       std::uint64_t cap = kDefaultTrajectoryCap);

/// Dense indexing of k-subsets of {0..N-1} via the combinatorial number system
/// (colexicographic rank). Used to store per-subset tables in flat arrays.
class SubsetRanker {
 public:
  SubsetRanker(std::size_t n, std::size_t max_k);
  std::uint64_t count(std::size_t k) const { return binom_[n_][k]; }
  std::uint64_t rank(std::span<const Element> sorted_members) const;
  std::uint64_t rank(const StateSet& s) const { return rank(s.members()); }
  /// Rank of s with element e inserted (e must not be in s).
  std::uint64_t rank_with(const StateSet& s, Element e) const;
  StateSet unrank(std::uint64_t rank, std::size_t k) const;

 private:
  std::size_t n_;
  std::size_t max_k_;
  std::vector<std::vector<std::uint64_t>> binom_;  // binom_[n][k] for n <= N, k <= max_k
};

}  // namespace subo
