#include "subo/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace subo {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::classical: return "classical";
    case Variant::subo: return "subo";
    case Variant::subo_f: return "subo_f";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "classical") return Variant::classical;
  if (name == "subo") return Variant::subo;
  if (name == "subo_f" || name == "subo-f") return Variant::subo_f;
  throw std::invalid_argument("unknown variant: " + name);
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(lr_policy > 0.0) || !(lr_log_z > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(mix_buffer_fraction >= 0.0 && mix_buffer_fraction <= 1.0))
    throw std::invalid_argument("mix_buffer_fraction must lie in [0, 1]");
  if (!(reward_floor > 0.0)) throw std::invalid_argument("reward_floor must be positive");
  if (embed_dim == 0 || hidden_dim == 0) throw std::invalid_argument("policy dimensions must be positive");
  if (eval_interval == 0) throw std::invalid_argument("eval_interval must be positive");
  if (top_k == 0) throw std::invalid_argument("top_k must be positive");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(ReplayEntry entry) {
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(std::move(entry));
}

const ReplayEntry& ReplayBuffer::sample(Rng& rng) const {
  if (entries_.empty()) throw std::logic_error("replay buffer is empty");
  return entries_[uniform_index(rng, entries_.size())];
}

std::vector<double> normalized_degree_feature(const CoverageGraph& graph) {
  std::vector<double> f(graph.num_vertices(), 0.0);
  std::size_t max_deg = 0;
  for (Element v = 0; v < graph.num_vertices(); ++v) max_deg = std::max(max_deg, graph.degree(v));
  if (max_deg == 0) return f;
  for (Element v = 0; v < graph.num_vertices(); ++v)
    f[v] = static_cast<double>(graph.degree(v)) / static_cast<double>(max_deg);
  return f;
}

namespace {

// Stream salts keep sampling, batch assembly and evaluation independent.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kEvalStream = 3;

class Trainer {
 public:
  Trainer(const TrainConfig& config, const ProblemInstance& instance, const SetFunction& reward,
          std::vector<double> feature, const MetricsCallback& on_record)
      : cfg_(config),
        instance_(instance),
        reward_(reward),
        on_record_(on_record),
        oracle_(reward, config.query_budget),
        policy_(instance.num_elements(), instance.cardinality(), config.embed_dim, config.hidden_dim,
                std::move(feature)),
        optimizer_(config.optimizer, config.lr_policy, config.lr_log_z),
        ledger_(instance),
        index_(instance, bound_config_for(reward)),
        buffer_(config.buffer_capacity
                    ? config.buffer_capacity
                    : static_cast<std::size_t>(std::min<std::uint64_t>(
                          std::max<std::uint64_t>(config.query_budget, 1),
                          std::numeric_limits<std::size_t>::max()))),
        grad_(policy_) {
    if (reward.num_elements() != instance.num_elements())
      throw std::invalid_argument("train: reward and instance disagree on N");
    Rng init(derive_seed(cfg_.seed, kInitStream));
    policy_.initialize(init, cfg_.init_scale);
    if (cfg_.eval_exact_tv) {
      try {
        target_ = target_terminal_distribution(reward_, instance_, cfg_.exact_caps);
      } catch (const EnumerationCapExceeded&) {
        target_.clear();
      }
    }
  }

  TrainedRun run() {
    const std::uint64_t limit = cfg_.total_steps ? *cfg_.total_steps : std::numeric_limits<std::uint64_t>::max();
    std::uint64_t offline_left = cfg_.offline_steps;
    while (step_ < limit) {
      if (online_) {
        if (!cfg_.total_steps && online_steps_ >= cfg_.max_online_steps) {
          online_ = false;
          continue;
        }
        const bool exhausted_now = collect_online_batch();
        ++online_steps_;
        train_step();
        if (exhausted_now) {
          online_ = false;
          exhausted_at_ = step_;
          record("transition");
          continue;
        }
        if (step_ % cfg_.eval_interval == 0) record("online");
      } else {
        if (!cfg_.total_steps) {
          if (offline_left == 0) break;
          --offline_left;
        }
        train_step();
        if (step_ % cfg_.eval_interval == 0) record("offline");
      }
    }
    if (records_.empty() || records_.back().step != step_) record(online_ ? "online" : "offline");

    TrainedRun out(std::move(policy_), std::move(ledger_), std::move(index_));
    out.metrics = std::move(records_);
    out.steps = step_;
    out.online_steps = online_steps_;
    out.queries_used = oracle_.queries_used();
    out.exhausted_at_step = exhausted_at_;
    out.at_exhaustion = at_exhaustion_;
    out.bound_fallbacks = bound_fallbacks_;
    out.dropped_partial = dropped_partial_;
    out.buffer_size = buffer_.size();
    return out;
  }

 private:
  bool uses_bounds() const { return cfg_.variant != Variant::classical; }

  // Samples and pays for one batch. Returns true if the budget ran out.
  bool collect_online_batch() {
    const PolicyEvaluator evaluator(policy_);
    const std::size_t c = instance_.cardinality();
    for (std::size_t b = 0; b < cfg_.batch_size; ++b) {
      Rng rng(derive_seed(derive_seed(cfg_.seed, kSampleStream), step_, b));
      Trajectory traj = sample_trajectory(evaluator, instance_, cfg_.epsilon, rng);
      const auto prefixes = traj.prefixes();
      std::vector<double> rewards(c + 1, std::numeric_limits<double>::quiet_NaN());
      std::size_t paid = 0;
      try {
        if (uses_bounds()) {
          for (std::size_t t = 0; t <= c; ++t) {
            rewards[t] = oracle_.metered_query(prefixes[t]);
            paid = t + 1;
          }
        } else {
          rewards[c] = oracle_.metered_query(prefixes[c]);
        }
      } catch (const BudgetExhausted&) {
        for (std::size_t t = 0; t < paid; ++t) record_state(prefixes[t], rewards[t]);
        ++dropped_partial_;
        return true;
      }
      if (uses_bounds()) {
        record_trajectory(ledger_, index_, traj, rewards);
      } else {
        ledger_.insert(prefixes[c], rewards[c]);
      }
      buffer_.push(ReplayEntry{std::move(traj), std::move(rewards)});
    }
    return oracle_.exhausted();
  }

  void record_state(const StateSet& s, double r) {
    if (uses_bounds()) {
      record_observation(ledger_, index_, s, r);
    } else if (instance_.is_terminal(s)) {
      ledger_.insert(s, r);
    }
  }

  double floored(double v) const { return std::max(v, cfg_.reward_floor); }

  void train_step() {
    Rng rng(derive_seed(derive_seed(cfg_.seed, kBatchStream), step_));
    std::vector<TrainingExample> batch;
    batch.reserve(cfg_.batch_size);
    std::size_t from_buffer = cfg_.batch_size;
    if (uses_bounds()) {
      const bool filtering = online_ || cfg_.variant == Variant::subo_f;
      const auto active = active_bounds(index_, ledger_, filtering);
      const auto buffer_share = static_cast<std::size_t>(
          std::llround(cfg_.mix_buffer_fraction * static_cast<double>(cfg_.batch_size)));
      if (active.empty() || buffer_share >= cfg_.batch_size) {
        if (buffer_share < cfg_.batch_size) ++bound_fallbacks_;
      } else {
        from_buffer = buffer_.empty() ? 0 : buffer_share;
        for (std::size_t j = from_buffer; j < cfg_.batch_size; ++j) {
          const UpperBoundEntry& e = *active[uniform_index(rng, active.size())];
          batch.push_back({sample_backward_to(instance_, e.terminal, rng), floored(e.value)});
        }
      }
    }
    if (!buffer_.empty())
      for (std::size_t j = 0; j < from_buffer; ++j) {
        const ReplayEntry& e = buffer_.sample(rng);
        batch.push_back({e.trajectory, floored(e.terminal_reward())});
      }
    ++step_;
    if (batch.empty()) return;
    const PolicyEvaluator evaluator(policy_);
    const double loss = tb_batch_loss(evaluator, batch, grad_);
    optimizer_.step(policy_, grad_);
    const double alpha = 2.0 / (static_cast<double>(cfg_.eval_interval) + 1.0);
    loss_ema_ = loss_ema_ ? (1.0 - alpha) * *loss_ema_ + alpha * loss : loss;
  }

  void record(const std::string& phase) {
    MetricsRecord r;
    r.step = step_;
    r.phase = phase;
    r.queries_used = oracle_.queries_used();
    r.loss = loss_ema_.value_or(std::numeric_limits<double>::quiet_NaN());
    if (cfg_.eval_fcs) {
      Rng rng(derive_seed(derive_seed(cfg_.seed, kEvalStream), step_));
      const auto res = fcs(policy_, instance_, reward_, cfg_.fcs, rng);
      if (res.epochs_used) r.fcs = res.value;
    }
    if (!target_.empty()) {
      const auto learned = learned_terminal_distribution(policy_, instance_, cfg_.exact_caps);
      r.exact_tv = total_variation(learned, target_);
    }
    if (!ledger_.observed_terminals().empty()) {
      const auto top = top_k_avg(ledger_, cfg_.top_k);
      r.top_k_avg = top.value;
      r.top_k_under = top.under_k;
    }
    r.num_bounds = index_.derivations();
    r.coverage = coverage_count(index_);
    if (phase == "transition") at_exhaustion_ = r;
    records_.push_back(r);
    if (on_record_) on_record_(r);
  }

  const TrainConfig& cfg_;
  const ProblemInstance& instance_;
  const SetFunction& reward_;
  const MetricsCallback& on_record_;
  RewardOracle oracle_;
  Policy policy_;
  Optimizer optimizer_;
  ObservationLedger ledger_;
  BoundIndex index_;
  ReplayBuffer buffer_;
  PolicyGradient grad_;
  std::vector<double> target_;
  std::vector<MetricsRecord> records_;
  std::optional<MetricsRecord> at_exhaustion_;
  std::optional<double> loss_ema_;
  std::optional<std::uint64_t> exhausted_at_;
  std::uint64_t step_ = 0;
  std::uint64_t online_steps_ = 0;
  std::uint64_t bound_fallbacks_ = 0;
  std::uint64_t dropped_partial_ = 0;
  bool online_ = true;
};

}  // namespace

TrainedRun train(const TrainConfig& config, const ProblemInstance& instance, const SetFunction& reward,
                 std::vector<double> element_feature, const MetricsCallback& on_record) {
  config.validate();
  Trainer trainer(config, instance, reward, std::move(element_feature), on_record);
  return trainer.run();
}

}  // namespace subo
