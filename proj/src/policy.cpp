#include "subo/policy.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace subo {

Policy::Policy(std::size_t num_elements, std::size_t cardinality, std::size_t embed_dim,
               std::size_t hidden_dim, std::vector<double> element_feature)
    : n_(num_elements), c_(cardinality), d_(embed_dim), h_(hidden_dim), feature_(std::move(element_feature)) {
  if (n_ == 0 || c_ == 0 || c_ > n_) throw std::invalid_argument("Policy: need 1 <= C <= N");
  if (d_ == 0 || h_ == 0) throw std::invalid_argument("Policy: dimensions must be positive");
  if (!feature_.empty() && feature_.size() != n_)
    throw std::invalid_argument("Policy: element feature must have one entry per element");
  layout_.e = 0;
  layout_.a = layout_.e + n_ * d_;
  layout_.b = layout_.a + h_ * d_;
  layout_.c = layout_.b + h_ * d_;
  layout_.d = layout_.c + h_;
  layout_.bias = layout_.d + h_;
  layout_.u = layout_.bias + h_;
  theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.u + h_));
}

void Policy::initialize(Rng& rng, double init_scale) {
  theta_.setZero();
  log_z = 0.0;
  auto fill = [&](MatMap m, double scale) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * standard_normal(rng);
  };
  fill(embeddings(), init_scale);
  const double fan = init_scale / std::sqrt(static_cast<double>(d_));
  fill(state_weights(), fan);
  fill(action_weights(), fan);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(h_); ++i) {
    size_weights()(i) = init_scale * standard_normal(rng);
    if (has_feature()) feature_weights()(i) = init_scale * standard_normal(rng);
  }
}

void Policy::save(std::ostream& out) const {
  out << "subo-policy 1\n" << n_ << ' ' << c_ << ' ' << d_ << ' ' << h_ << ' ' << feature_.size() << '\n';
  out << std::setprecision(17);
  for (double f : feature_) out << f << '\n';
  out << log_z << '\n';
  for (Eigen::Index i = 0; i < theta_.size(); ++i) out << theta_(i) << '\n';
  if (!out) throw std::runtime_error("policy checkpoint: write failed");
}

Policy Policy::load(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "subo-policy" || version != 1) throw std::runtime_error("policy checkpoint: bad header");
  std::size_t n = 0, c = 0, d = 0, h = 0, nf = 0;
  in >> n >> c >> d >> h >> nf;
  if (!in) throw std::runtime_error("policy checkpoint: bad dimensions");
  std::vector<double> feature(nf);
  for (double& f : feature) in >> f;
  Policy p(n, c, d, h, std::move(feature));
  in >> p.log_z;
  for (Eigen::Index i = 0; i < p.theta_.size(); ++i) in >> p.theta_(i);
  if (!in) throw std::runtime_error("policy checkpoint: truncated parameters");
  return p;
}

PolicyEvaluator::PolicyEvaluator(const Policy& policy) : policy_(&policy) {
  action_terms_ = policy.action_weights() * policy.embeddings().transpose();
  if (policy.has_feature()) {
    const Eigen::Map<const Eigen::VectorXd> f(policy.element_feature().data(),
                                              static_cast<Eigen::Index>(policy.num_elements()));
    action_terms_.noalias() += policy.feature_weights() * f.transpose();
  }
}

Eigen::VectorXd PolicyEvaluator::state_term(const StateSet& state) const {
  const Policy& p = *policy_;
  Eigen::VectorXd pool = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.embed_dim()));
  if (!state.empty()) {
    for (Element e : state) pool += p.embeddings().row(e).transpose();
    pool /= static_cast<double>(state.size());
  }
  Eigen::VectorXd term = p.state_weights() * pool + p.hidden_bias();
  term += p.size_weights() * (static_cast<double>(state.size()) / static_cast<double>(p.cardinality()));
  return term;
}

namespace {

// Masked softmax over the available actions of `state`; logits for the rest are
// never formed. Writes hidden activations per available action when `hidden` is set.
void evaluate_state(const PolicyEvaluator& ev, const StateSet& state, std::span<double> probs,
                    Eigen::MatrixXd* hidden) {
  const Policy& p = ev.policy();
  const std::size_t n = p.num_elements();
  if (state.size() >= p.cardinality()) throw std::logic_error("forward policy: terminating state");
  if (probs.size() != n) throw std::invalid_argument("forward policy: output size must be N");
  const Eigen::VectorXd base = ev.state_term(state);
  const auto u = p.output_weights();
  // taken elements are marked with NaN until the normalization pass
  const double taken = std::numeric_limits<double>::quiet_NaN();
  for (Element e : state) probs[e] = taken;
  double max_logit = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd z(base.size());
  auto it = state.begin();
  for (std::size_t a = 0; a < n; ++a) {
    if (it != state.end() && *it == a) {
      ++it;
      continue;
    }
    // tanh via the vectorized exp; saturates cleanly to +-1
    z = (1.0 - 2.0 / ((2.0 * (base + ev.action_terms().col(static_cast<Eigen::Index>(a))).array()).exp() + 1.0))
            .matrix();
    if (hidden) hidden->col(static_cast<Eigen::Index>(a)) = z;
    probs[a] = u.dot(z);
    max_logit = std::max(max_logit, probs[a]);
  }
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (std::isnan(probs[a])) continue;
    probs[a] = std::exp(probs[a] - max_logit);
    total += probs[a];
  }
  for (std::size_t a = 0; a < n; ++a) probs[a] = std::isnan(probs[a]) ? 0.0 : probs[a] / total;
}

double log_factorial(std::size_t k) { return std::lgamma(static_cast<double>(k) + 1.0); }

}  // namespace

void PolicyEvaluator::probabilities(const StateSet& state, std::span<double> out) const {
  evaluate_state(*this, state, out, nullptr);
}

std::vector<double> PolicyEvaluator::probabilities(const StateSet& state) const {
  std::vector<double> out(policy_->num_elements());
  probabilities(state, out);
  return out;
}

std::vector<double> forward_policy(const Policy& policy, const StateSet& state) {
  return PolicyEvaluator(policy).probabilities(state);
}

double backward_policy_logprob(const StateSet& from, const StateSet& to) {
  if (to.size() + 1 != from.size() || !to.is_subset_of(from))
    throw std::invalid_argument("backward policy: target must be the source minus one element");
  return -std::log(static_cast<double>(from.size()));
}

Trajectory sample_trajectory(const PolicyEvaluator& evaluator, const ProblemInstance& instance,
                             double epsilon, Rng& rng) {
  const std::size_t n = instance.num_elements();
  std::vector<double> probs(n);
  std::vector<Element> additions;
  StateSet s;
  while (s.size() < instance.cardinality()) {
    Element a = 0;
    if (epsilon > 0.0 && bernoulli(rng, epsilon)) {
      const auto avail = available_actions(instance, s);
      a = avail[uniform_index(rng, avail.size())];
    } else {
      evaluator.probabilities(s, probs);
      a = static_cast<Element>(sample_categorical(rng, probs));
    }
    additions.push_back(a);
    s = s.with(a);
  }
  return Trajectory(instance, std::move(additions));
}

Trajectory sample_backward_to(const ProblemInstance& instance, const StateSet& terminal, Rng& rng) {
  if (!instance.is_terminal(terminal))
    throw std::invalid_argument("sample_backward_to: state is not terminating");
  std::vector<Element> order(terminal.begin(), terminal.end());
  // removing a uniform element each step yields a uniform ordering, reversed
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return Trajectory(instance, std::move(order));
}

namespace {

struct StepCache {
  StateSet state;
  Element action = 0;
  std::vector<double> probs;
  Eigen::MatrixXd hidden;  // H x N, valid on available columns
};

// Forward pass along the trajectory; returns the TB residual.
double forward_pass(const PolicyEvaluator& ev, const Trajectory& trajectory, double signal,
                    std::vector<StepCache>* cache) {
  if (!(signal > 0.0)) throw std::invalid_argument("tb loss: signal must be positive");
  const Policy& p = ev.policy();
  if (trajectory.length() != p.cardinality())
    throw std::invalid_argument("tb loss: trajectory length differs from C");
  const std::size_t n = p.num_elements();
  double sum_log_pf = 0.0;
  StateSet s;
  std::vector<double> probs(n);
  for (Element a : trajectory.additions()) {
    if (cache) {
      StepCache& step = cache->emplace_back();
      step.state = s;
      step.action = a;
      step.probs.assign(n, 0.0);
      step.hidden.resize(static_cast<Eigen::Index>(p.hidden_dim()), static_cast<Eigen::Index>(n));
      evaluate_state(ev, s, step.probs, &step.hidden);
      sum_log_pf += std::log(step.probs[a]);
    } else {
      evaluate_state(ev, s, probs, nullptr);
      sum_log_pf += std::log(probs[a]);
    }
    s = s.with(a);
  }
  const double sum_log_pb = -log_factorial(p.cardinality());
  return p.log_z + sum_log_pf - std::log(signal) - sum_log_pb;
}

// Adds the gradient of weight * residual^2 into grad; per-action hidden
// gradients are collected in g_action (H x N) and folded in by the caller.
void backward_pass(const PolicyEvaluator& ev, const std::vector<StepCache>& cache, double residual,
                   double weight, PolicyGradient& grad, Eigen::MatrixXd& g_action) {
  const Policy& p = ev.policy();
  const std::size_t n = p.num_elements();
  const auto h = static_cast<Eigen::Index>(p.hidden_dim());
  const auto d = static_cast<Eigen::Index>(p.embed_dim());
  const double scale = 2.0 * residual * weight;
  grad.log_z += scale;

  const auto& at = p.layout();
  Eigen::Map<Eigen::MatrixXd> g_e(grad.theta.data() + at.e, static_cast<Eigen::Index>(n), d);
  Eigen::Map<Eigen::MatrixXd> g_a(grad.theta.data() + at.a, h, d);
  Eigen::Map<Eigen::VectorXd> g_c(grad.theta.data() + at.c, h);
  Eigen::Map<Eigen::VectorXd> g_bias(grad.theta.data() + at.bias, h);
  Eigen::Map<Eigen::VectorXd> g_u(grad.theta.data() + at.u, h);

  const auto u = p.output_weights();
  Eigen::VectorXd sum_pre(h), g_pre(h), pool(d);
  for (const StepCache& step : cache) {
    sum_pre.setZero();
    for (std::size_t a = 0; a < n; ++a) {
      if (step.state.contains(static_cast<Element>(a))) continue;
      const double g_logit = scale * ((a == step.action ? 1.0 : 0.0) - step.probs[a]);
      if (g_logit == 0.0) continue;
      const auto z = step.hidden.col(static_cast<Eigen::Index>(a));
      g_u.noalias() += g_logit * z;
      g_pre = (g_logit * u.array() * (1.0 - z.array().square())).matrix();
      sum_pre += g_pre;
      g_action.col(static_cast<Eigen::Index>(a)) += g_pre;
    }
    const double frac = static_cast<double>(step.state.size()) / static_cast<double>(p.cardinality());
    g_c.noalias() += frac * sum_pre;
    g_bias += sum_pre;
    if (!step.state.empty()) {
      pool.setZero();
      for (Element e : step.state) pool += p.embeddings().row(e).transpose();
      pool /= static_cast<double>(step.state.size());
      g_a.noalias() += sum_pre * pool.transpose();
      const Eigen::VectorXd g_pool = p.state_weights().transpose() * sum_pre / static_cast<double>(step.state.size());
      for (Element e : step.state) g_e.row(e) += g_pool.transpose();
    }
  }
}

// Folds the accumulated per-action hidden gradient into E, B and d.
void fold_action_gradient(const Policy& p, const Eigen::MatrixXd& g_action, PolicyGradient& grad) {
  const std::size_t n = p.num_elements();
  const auto h = static_cast<Eigen::Index>(p.hidden_dim());
  const auto d = static_cast<Eigen::Index>(p.embed_dim());
  const auto& at = p.layout();
  Eigen::Map<Eigen::MatrixXd> g_e(grad.theta.data() + at.e, static_cast<Eigen::Index>(n), d);
  Eigen::Map<Eigen::MatrixXd> g_b(grad.theta.data() + at.b, h, d);
  // action term = B e_a + d f_a
  g_b.noalias() += g_action * p.embeddings();
  g_e.noalias() += g_action.transpose() * p.action_weights();
  if (p.has_feature()) {
    Eigen::Map<Eigen::VectorXd> g_d(grad.theta.data() + at.d, h);
    const Eigen::Map<const Eigen::VectorXd> f(p.element_feature().data(), static_cast<Eigen::Index>(n));
    g_d.noalias() += g_action * f;
  }
}

}  // namespace

double tb_residual(const PolicyEvaluator& evaluator, const Trajectory& trajectory, double signal) {
  return forward_pass(evaluator, trajectory, signal, nullptr);
}

double tb_loss(const PolicyEvaluator& evaluator, const Trajectory& trajectory, double signal,
               PolicyGradient* grad, double weight) {
  if (!grad) {
    const double r = forward_pass(evaluator, trajectory, signal, nullptr);
    return r * r;
  }
  std::vector<StepCache> cache;
  const double r = forward_pass(evaluator, trajectory, signal, &cache);
  const Policy& p = evaluator.policy();
  Eigen::MatrixXd g_action = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.hidden_dim()),
                                                   static_cast<Eigen::Index>(p.num_elements()));
  backward_pass(evaluator, cache, r, weight, *grad, g_action);
  fold_action_gradient(p, g_action, *grad);
  return r * r;
}

double tb_batch_loss(const PolicyEvaluator& evaluator, std::span<const TrainingExample> batch,
                     PolicyGradient& grad) {
  grad.set_zero();
  if (batch.empty()) return 0.0;
  const Policy& p = evaluator.policy();
  const double w = 1.0 / static_cast<double>(batch.size());
  Eigen::MatrixXd g_action = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.hidden_dim()),
                                                   static_cast<Eigen::Index>(p.num_elements()));
  double total = 0.0;
  std::vector<StepCache> cache;
  for (const auto& ex : batch) {
    cache.clear();
    const double r = forward_pass(evaluator, ex.trajectory, ex.signal, &cache);
    backward_pass(evaluator, cache, r, w, grad, g_action);
    total += r * r;
  }
  fold_action_gradient(p, g_action, grad);
  return total * w;
}

Optimizer::Optimizer(Kind kind, double lr_policy, double lr_log_z, double beta1, double beta2, double eps)
    : kind_(kind), lr_policy_(lr_policy), lr_log_z_(lr_log_z), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr_policy > 0.0) || !(lr_log_z > 0.0)) throw std::invalid_argument("optimizer: rates must be positive");
}

void Optimizer::step(Policy& policy, const PolicyGradient& grad) {
  auto& theta = policy.parameters();
  if (kind_ == Kind::sgd) {
    theta.noalias() -= lr_policy_ * grad.theta;
    policy.log_z -= lr_log_z_ * grad.log_z;
    return;
  }
  if (m_.size() != theta.size()) {
    m_ = Eigen::VectorXd::Zero(theta.size());
    v_ = Eigen::VectorXd::Zero(theta.size());
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad.theta;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.theta.cwiseProduct(grad.theta);
  theta.array() -= lr_policy_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  m_z_ = beta1_ * m_z_ + (1.0 - beta1_) * grad.log_z;
  v_z_ = beta2_ * v_z_ + (1.0 - beta2_) * grad.log_z * grad.log_z;
  policy.log_z -= lr_log_z_ * (m_z_ / c1) / (std::sqrt(v_z_ / c2) + eps_);
}

}  // namespace subo
