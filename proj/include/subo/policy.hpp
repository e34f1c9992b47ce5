#pragma once

// Forward policy over the set-construction DAG and its Trajectory Balance loss.
//
// Each candidate action a at state s is scored by a shared two-layer perceptron:
//
//   pool(s)  = mean of element embeddings over s (zero for the empty set)
//   z_a      = tanh(A pool(s) + B e_a + c |s|/C + d f_a + b)
//   logit_a  = u . z_a
//
// followed by a softmax over A(s) = {a not in s}. f is an optional per-element
// feature (e.g. normalized vertex degree). Relabeling elements together with
// their embeddings and features permutes the output identically.
//
// The backward policy is fixed: P_B(s | s + {a}) = 1 / |s + {a}|.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "subo/dag.hpp"
#include "subo/rng.hpp"

namespace subo {

class Policy {
 public:
  /// element_feature is empty or has one entry per element.
  Policy(std::size_t num_elements, std::size_t cardinality, std::size_t embed_dim,
         std::size_t hidden_dim, std::vector<double> element_feature = {});

  /// Gaussian embeddings and input weights scaled by init_scale / sqrt(fan-in);
  /// biases and the output vector u start at zero, so the initial policy is uniform.
  void initialize(Rng& rng, double init_scale = 1.0);

  std::size_t num_elements() const { return n_; }
  std::size_t cardinality() const { return c_; }
  std::size_t embed_dim() const { return d_; }
  std::size_t hidden_dim() const { return h_; }
  const std::vector<double>& element_feature() const { return feature_; }
  bool has_feature() const { return !feature_.empty(); }

  /// Offsets of each block in parameters(); matrices are column-major.
  struct Layout {
    std::size_t e, a, b, c, d, bias, u;
  };
  const Layout& layout() const { return layout_; }

  /// All parameters except log Z, in the layout E, A, B, c, d, b, u.
  Eigen::VectorXd& parameters() { return theta_; }
  const Eigen::VectorXd& parameters() const { return theta_; }
  double log_z = 0.0;

  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using VecMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

  ConstMatMap embeddings() const { return {theta_.data() + layout_.e, static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(d_)}; }
  MatMap embeddings() { return {theta_.data() + layout_.e, static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(d_)}; }
  ConstMatMap state_weights() const { return {theta_.data() + layout_.a, static_cast<Eigen::Index>(h_), static_cast<Eigen::Index>(d_)}; }
  MatMap state_weights() { return {theta_.data() + layout_.a, static_cast<Eigen::Index>(h_), static_cast<Eigen::Index>(d_)}; }
  ConstMatMap action_weights() const { return {theta_.data() + layout_.b, static_cast<Eigen::Index>(h_), static_cast<Eigen::Index>(d_)}; }
  MatMap action_weights() { return {theta_.data() + layout_.b, static_cast<Eigen::Index>(h_), static_cast<Eigen::Index>(d_)}; }
  ConstVecMap size_weights() const { return vec(layout_.c); }
  VecMap size_weights() { return vec(layout_.c); }
  ConstVecMap feature_weights() const { return vec(layout_.d); }
  VecMap feature_weights() { return vec(layout_.d); }
  ConstVecMap hidden_bias() const { return vec(layout_.bias); }
  VecMap hidden_bias() { return vec(layout_.bias); }
  ConstVecMap output_weights() const { return vec(layout_.u); }
  VecMap output_weights() { return vec(layout_.u); }

  /// Text checkpoint: dimensions, feature vector, parameters, log Z at full precision.
  void save(std::ostream& out) const;
  static Policy load(std::istream& in);

 private:
  ConstVecMap vec(std::size_t off) const { return {theta_.data() + off, static_cast<Eigen::Index>(h_)}; }
  VecMap vec(std::size_t off) { return {theta_.data() + off, static_cast<Eigen::Index>(h_)}; }

  std::size_t n_, c_, d_, h_;
  std::vector<double> feature_;
  Layout layout_;
  Eigen::VectorXd theta_;
};

/// Read-only evaluation handle. Precomputes the per-action hidden terms once,
/// so per-state cost is O(H (D + N)). Invalidated by any parameter change.
class PolicyEvaluator {
 public:
  explicit PolicyEvaluator(const Policy& policy);

  const Policy& policy() const { return *policy_; }

  /// P_F(. | state) over all N elements; unavailable actions get exactly 0.
  /// Throws std::logic_error for a terminating state.
  void probabilities(const StateSet& state, std::span<double> out) const;
  std::vector<double> probabilities(const StateSet& state) const;

  /// Hidden pre-activation shared by every action at this state (length H).
  Eigen::VectorXd state_term(const StateSet& state) const;
  /// Per-action hidden terms B e_a + d f_a as columns (H x N).
  const Eigen::MatrixXd& action_terms() const { return action_terms_; }

 private:
  const Policy* policy_;
  Eigen::MatrixXd action_terms_;
};

/// P_F(. | state) as a vector over all N elements (0 on unavailable actions).
std::vector<double> forward_policy(const Policy& policy, const StateSet& state);

/// log P_B(to | from) = -log |from|; throws std::invalid_argument unless
/// `to` is `from` with exactly one element removed.
double backward_policy_logprob(const StateSet& from, const StateSet& to);

/// Forward rollout from the empty set; with probability epsilon a step is
/// uniform over A(s), otherwise drawn from P_F.
Trajectory sample_trajectory(const PolicyEvaluator& evaluator, const ProblemInstance& instance,
                             double epsilon, Rng& rng);

/// Uniform backward walk from `terminal` to the empty set, returned as the
/// forward trajectory that ends at `terminal`.
Trajectory sample_backward_to(const ProblemInstance& instance, const StateSet& terminal, Rng& rng);

struct PolicyGradient {
  Eigen::VectorXd theta;
  double log_z = 0.0;

  explicit PolicyGradient(const Policy& policy)
      : theta(Eigen::VectorXd::Zero(policy.parameters().size())) {}
  void set_zero() {
    theta.setZero();
    log_z = 0.0;
  }
};

struct TrainingExample {
  Trajectory trajectory;
  /// R(x) or UB(x), already floored; must be positive.
  double signal = 0.0;
};

/// log Z + sum log P_F - log signal - sum log P_B along the trajectory.
double tb_residual(const PolicyEvaluator& evaluator, const Trajectory& trajectory, double signal);

/// Squared TB residual for one trajectory. When `grad` is given, adds
/// weight * d(loss)/d(parameters) into it.
double tb_loss(const PolicyEvaluator& evaluator, const Trajectory& trajectory, double signal,
               PolicyGradient* grad = nullptr, double weight = 1.0);

/// Mean TB loss over the batch; `grad` is overwritten with the mean gradient.
double tb_batch_loss(const PolicyEvaluator& evaluator, std::span<const TrainingExample> batch,
                     PolicyGradient& grad);

/// Parameter update rule with separate rates for the policy and log Z.
class Optimizer {
 public:
  enum class Kind { sgd, adam };
  Optimizer(Kind kind, double lr_policy, double lr_log_z, double beta1 = 0.9, double beta2 = 0.999,
            double eps = 1e-8);
  void step(Policy& policy, const PolicyGradient& grad);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
  double lr_policy_, lr_log_z_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  Eigen::VectorXd m_, v_;
  double m_z_ = 0.0, v_z_ = 0.0;
};

}  // namespace subo
