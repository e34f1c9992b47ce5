#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "subo/train.hpp"

using namespace subo;

namespace {

TrainConfig small_config(Variant v) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 8;
  cfg.batch_size = 4;
  cfg.eval_interval = 5;
  cfg.eval_fcs = false;
  cfg.top_k = 5;
  return cfg;
}

std::vector<double> flat_parameters(const Policy& p) {
  const auto theta = p.parameters();
  std::vector<double> out(theta.data(), theta.data() + theta.size());
  out.push_back(p.log_z);
  return out;
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (Variant v : {Variant::classical, Variant::subo, Variant::subo_f}) CHECK(parse_variant(to_string(v)) == v);
  CHECK(parse_variant("subo-f") == Variant::subo_f);
  CHECK_THROWS_AS(parse_variant("gfn"), std::invalid_argument);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto expect_bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  expect_bad([](TrainConfig& c) { c.batch_size = 0; });
  expect_bad([](TrainConfig& c) { c.lr_policy = 0.0; });
  expect_bad([](TrainConfig& c) { c.epsilon = 1.5; });
  expect_bad([](TrainConfig& c) { c.mix_buffer_fraction = -0.1; });
  expect_bad([](TrainConfig& c) { c.reward_floor = 0.0; });
  expect_bad([](TrainConfig& c) { c.eval_interval = 0; });
}

TEST_CASE("replay buffer evicts oldest first") {
  const ProblemInstance inst(5, 1);
  ReplayBuffer buf(3);
  CHECK_THROWS(ReplayBuffer(0));
  Rng rng(1);
  CHECK_THROWS(buf.sample(rng));
  for (Element a = 0; a < 5; ++a) buf.push(ReplayEntry{Trajectory(inst, {a}), {0.0, static_cast<double>(a)}});
  REQUIRE(buf.size() == 3);
  CHECK(buf[0].terminal_reward() == 2.0);
  CHECK(buf[2].terminal_reward() == 4.0);
  for (int i = 0; i < 50; ++i) CHECK(buf.sample(rng).terminal_reward() >= 2.0);
}

TEST_CASE("classical variant pays once per distinct terminal") {
  const CoverageGraph g = generate_er(30, 0.2, 1);
  const CoverageReward reward(g);
  const ProblemInstance inst(30, 3);
  auto cfg = small_config(Variant::classical);
  cfg.total_steps = 1;
  cfg.epsilon = 1.0;
  const auto run = train(cfg, inst, reward);
  const auto terminals = run.ledger.observed_terminals();
  CHECK(run.queries_used == terminals.size());
  CHECK(run.ledger.size() == terminals.size());
  CHECK(run.index.size() == 0);
  CHECK(run.buffer_size == 4);
}

TEST_CASE("bound variant pays C for a fresh trajectory") {
  const CoverageGraph g = generate_er(20, 0.2, 2);
  const CoverageReward reward(g);
  const ProblemInstance inst(20, 4);
  auto cfg = small_config(Variant::subo);
  cfg.batch_size = 1;
  cfg.total_steps = 1;
  const auto run = train(cfg, inst, reward);
  CHECK(run.queries_used == 4);
  CHECK(run.ledger.size() == 5);
  // every action on a lone trajectory already lies in its own parent
  CHECK(run.index.derivations() == 0);
}

TEST_CASE("budget is never exceeded and exhaustion switches phase") {
  const CoverageGraph g = generate_ba(16, 2, 3);
  const CoverageReward reward(g);
  const ProblemInstance inst(16, 3);
  for (Variant v : {Variant::classical, Variant::subo, Variant::subo_f}) {
    auto cfg = small_config(v);
    cfg.query_budget = 37;
    cfg.offline_steps = 12;
    std::uint64_t last_queries = 0;
    const auto run = train(cfg, inst, reward, {}, [&](const MetricsRecord& r) {
      CHECK(r.queries_used <= 37);
      CHECK(r.queries_used >= last_queries);
      last_queries = r.queries_used;
    });
    CHECK(run.queries_used == 37);
    REQUIRE(run.exhausted_at_step);
    REQUIRE(run.at_exhaustion);
    CHECK(run.at_exhaustion->phase == "transition");
    CHECK(run.at_exhaustion->step == *run.exhausted_at_step);
    CHECK(run.steps == *run.exhausted_at_step + 12);
    CHECK(run.online_steps == *run.exhausted_at_step);
    CHECK(run.metrics.back().phase == "offline");
    CHECK(run.metrics.back().step == run.steps);
    if (v == Variant::classical) {
      CHECK(run.ledger.observed_terminals().size() == 37);
    } else {
      CHECK(run.ledger.size() == 37 + 1);
    }
  }
}

TEST_CASE("identical step counts across variants") {
  const CoverageGraph g = generate_er(14, 0.3, 5);
  const CoverageReward reward(g);
  const ProblemInstance inst(14, 3);
  for (Variant v : {Variant::classical, Variant::subo, Variant::subo_f}) {
    auto cfg = small_config(v);
    cfg.query_budget = 20;
    cfg.total_steps = 40;
    const auto run = train(cfg, inst, reward);
    CHECK(run.steps == 40);
    CHECK(run.metrics.back().step == 40);
  }
}

TEST_CASE("training is reproducible for a fixed seed") {
  const CoverageGraph g = generate_er(12, 0.3, 6);
  const CoverageReward reward(g);
  const ProblemInstance inst(12, 3);
  auto cfg = small_config(Variant::subo_f);
  cfg.query_budget = 60;
  cfg.offline_steps = 20;
  cfg.seed = 17;
  cfg.eval_fcs = true;
  cfg.fcs.epochs = 2;
  cfg.fcs.forward_samples = 8;
  const auto a = train(cfg, inst, reward, normalized_degree_feature(g));
  const auto b = train(cfg, inst, reward, normalized_degree_feature(g));
  CHECK(flat_parameters(a.policy) == flat_parameters(b.policy));
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].step == b.metrics[i].step);
    CHECK(a.metrics[i].queries_used == b.metrics[i].queries_used);
    CHECK(a.metrics[i].loss == b.metrics[i].loss);
    CHECK(a.metrics[i].fcs == b.metrics[i].fcs);
    CHECK(a.metrics[i].exact_tv == b.metrics[i].exact_tv);
    CHECK(a.metrics[i].coverage == b.metrics[i].coverage);
  }
  cfg.seed = 18;
  const auto c = train(cfg, inst, reward, normalized_degree_feature(g));
  CHECK(flat_parameters(a.policy) != flat_parameters(c.policy));
}

TEST_CASE("bounds never point at observed terminals") {
  const CoverageGraph g = generate_er(14, 0.25, 8);
  const CoverageReward reward(g);
  const ProblemInstance inst(14, 3);
  auto cfg = small_config(Variant::subo);
  cfg.query_budget = 80;
  cfg.offline_steps = 5;
  const auto run = train(cfg, inst, reward);
  REQUIRE(run.index.size() > 0);
  for (const auto& e : run.index.entries()) {
    CHECK_FALSE(run.ledger.terminal_observed(e.terminal));
    CHECK(e.value >= reward(e.terminal) - 1e-12);
  }
  CHECK(run.metrics.back().coverage == run.index.size());
}

TEST_CASE("bound batches fall back to the buffer when nothing is active") {
  // a constant reward makes every bound equal the best observed value, so the
  // filter removes them all
  const ProblemInstance inst(10, 3);
  auto cfg = small_config(Variant::subo_f);
  cfg.query_budget = 30;
  cfg.offline_steps = 10;
  const auto run = train(cfg, inst, ConstantReward(10, 1.0));
  CHECK(run.bound_fallbacks == run.steps);
}

TEST_CASE("exhaustion mid-trajectory keeps the paid prefixes") {
  const CoverageGraph g = generate_er(25, 0.2, 9);
  const CoverageReward reward(g);
  const ProblemInstance inst(25, 4);
  auto cfg = small_config(Variant::subo);
  cfg.batch_size = 1;
  cfg.query_budget = 6;
  cfg.offline_steps = 2;
  const auto run = train(cfg, inst, reward);
  CHECK(run.queries_used == 6);
  CHECK(run.dropped_partial == 1);
  CHECK(run.buffer_size == 1);
  CHECK(run.ledger.size() == 7);
  CHECK(run.exhausted_at_step == 2);
}

TEST_CASE("a uniform reward is learned") {
  const ProblemInstance inst(10, 3);
  auto cfg = small_config(Variant::subo);
  cfg.optimizer = Optimizer::Kind::adam;
  cfg.lr_policy = 1e-3;
  cfg.lr_log_z = 5e-2;
  cfg.embed_dim = 16;
  cfg.hidden_dim = 16;
  cfg.batch_size = 16;
  cfg.init_scale = 1.0;
  cfg.query_budget = 100;
  cfg.total_steps = 600;
  cfg.eval_interval = 600;
  const auto run = train(cfg, inst, ConstantReward(10, 1.0));
  REQUIRE(run.metrics.back().exact_tv);
  CHECK(*run.metrics.back().exact_tv < 0.05);
  CHECK(std::fabs(run.policy.log_z - std::log(120.0)) < 0.5);
}

TEST_CASE("degree feature") {
  CoverageGraph star(5);
  for (Element v = 1; v < 5; ++v) star.add_edge(0, v);
  const auto f = normalized_degree_feature(star);
  CHECK(f[0] == 1.0);
  for (std::size_t i = 1; i < 5; ++i) CHECK(f[i] == doctest::Approx(0.25));
  CHECK(normalized_degree_feature(CoverageGraph(3)) == std::vector<double>(3, 0.0));
}
