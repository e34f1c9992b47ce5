// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// The desk-scale training criteria read their settings from configs/.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "subo/combinatorics.hpp"
#include "subo/experiment.hpp"
#include "subo/optimism.hpp"
#include "subo/pairing.hpp"

using namespace subo;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ExperimentConfig desk_config(const std::string& name) {
  const std::filesystem::path path = std::filesystem::path(SUBO_SOURCE_DIR) / "configs" / name;
  auto cfg = ExperimentConfig::from_key_values(load_key_values(path), path.parent_path());
  cfg.validate();
  return cfg;
}

// Runs jobs on up to SUBO_THREADS threads.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const unsigned threads = std::max(1u, std::min<unsigned>(threads_from_env(), static_cast<unsigned>(count)));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

StateSet random_subset(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<Element> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<Element>(i);
  for (std::size_t j = 0; j < k; ++j) std::swap(pool[j], pool[j + uniform_index(rng, n - j)]);
  pool.resize(k);
  return StateSet(pool);
}

// ---------------------------------------------------------------------------

Outcome counting_exactness() {
  std::size_t rows = 0, bad = 0;
  for (std::uint64_t n = 2; n <= 8; ++n)
    for (std::uint64_t c = 1; c <= std::min<std::uint64_t>(4, n / 2); ++c) {
      const auto cf = closed_form_stats(n, c);
      const auto o = oracle_pairing_stats(n, c).stats;
      ++rows;
      if (!(cf.lambda == o.lambda && cf.alpha == o.alpha && cf.beta == o.beta && cf.phi == o.phi &&
            cf.edge_count == o.edge_count && cf.edge_count == cf.alpha * cf.beta))
        ++bad;
    }
  return {bad == 0, std::to_string(rows) + " (N, C) pairs, " + std::to_string(bad) + " mismatches"};
}

struct McGrid {
  std::vector<McRow> rows;
};

McGrid small_grid() {
  McGrid g;
  for (std::uint64_t n : {4u, 5u}) {
    auto rows = mc_table(n, 2, {5, 12, 40}, 5000, 100 + n, threads_from_env(), false);
    g.rows.insert(g.rows.end(), rows.begin(), rows.end());
  }
  return g;
}

Outcome expected_q_agreement(const McGrid& grid) {
  bool ok = true;
  std::ostringstream d;
  for (const auto& r : grid.rows) {
    const double z = std::fabs(r.mc->q.mean - r.expected_q) / r.mc->q.se;
    ok = ok && z <= 3.0;
    d << "N=" << r.n << " m=" << r.m << " z=" << fmt("%.2f", z) << "; ";
  }
  return {ok, d.str()};
}

Outcome janson_validity(const McGrid& grid) {
  bool ok = true;
  std::ostringstream d;
  for (const auto& r : grid.rows) {
    const bool point = r.mc->p_positive.mean >= r.janson_lower - 3.0 * r.mc->p_positive.se;
    ok = ok && point;
    d << "N=" << r.n << " m=" << r.m << " P(Q>0)=" << fmt("%.4f", r.mc->p_positive.mean) << " bound "
      << fmt("%.4f", r.janson_lower) << " (full-dependency " << fmt("%.4f", *r.janson_lower_full) << ")"
      << (point ? "" : " VIOLATED") << "; ";
  }
  bool shape = true;
  for (std::uint64_t n : {4u, 5u}) {
    double prev = 0.0;
    for (int m = 0; m <= 200; ++m) {
      const double j = janson_lower_bound(n, 2, m);
      shape = shape && j >= 0.0 && j <= 1.0 && j >= prev;
      prev = j;
    }
  }
  d << "range/monotone " << (shape ? "ok" : "broken");
  return {ok && shape, d.str()};
}

Outcome coverage_bound() {
  const auto rows = mc_table(6, 3, {10, 30, 100}, 2000, 7, threads_from_env(), false);
  bool ok = true;
  std::ostringstream d;
  for (const auto& r : rows) {
    const double target = r.coverage_lower - 3.0 * r.mc->coverage.se;
    ok = ok && r.mc->coverage.mean >= target;
    d << "m=" << r.m << " kappa=" << fmt("%.2f", r.mc->coverage.mean) << " bound " << fmt("%.2f", r.coverage_lower)
      << "; ";
  }
  return {ok, d.str()};
}

Outcome bound_validity() {
  Rng rng(55);
  std::size_t violations = 0, modular_misses = 0;
  const std::size_t n = 24;
  for (int trial = 0; trial < 10000; ++trial) {
    CoverageGraph g;
    switch (trial % 3) {
      case 0: g = generate_er(n, 0.15, trial); break;
      case 1: g = generate_ba(n, 2, trial); break;
      default: g = path_graph(n); break;
    }
    const CoverageReward reward(g);
    std::vector<double> w(n);
    for (double& v : w) v = uniform01(rng);
    const ModularReward modular(w, 0.1);
    const std::size_t c = 2 + uniform_index(rng, 6);
    const ProblemInstance inst(n, c);
    const StateSet x = random_subset(rng, n, c);
    const auto members = x.members();
    const Element a = members[uniform_index(rng, c)];
    const StateSet p = x.without(a);
    std::vector<Element> s_members;
    for (Element e : p)
      if (bernoulli(rng, 0.5)) s_members.push_back(e);
    const StateSet s(s_members);
    for (const SetFunction* r : {static_cast<const SetFunction*>(&reward), static_cast<const SetFunction*>(&modular)}) {
      ObservationLedger ledger(inst);
      for (const StateSet& t : {s, s.with(a), p}) ledger.insert(t, (*r)(t));
      const double ub = bound_value(ledger, s, a, p, bound_config_for(*r));
      // modular bounds equal R(x) in exact arithmetic, so only roundoff separates them
      const double slack = r == &modular ? 1e-12 : 0.0;
      if (ub < (*r)(x) - slack) ++violations;
      if (r == &modular && std::fabs(ub - (*r)(x)) > 1e-12) ++modular_misses;
    }
  }
  return {violations == 0 && modular_misses == 0,
          "20000 bounds, " + std::to_string(violations) + " violations, " + std::to_string(modular_misses) +
              " inexact modular bounds"};
}

Outcome submodularity() {
  std::vector<CoverageGraph> graphs;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    graphs.push_back(seed % 2 ? generate_er(40, 0.08, seed) : generate_ba(40, 2, seed));
  Rng rng(77);
  std::size_t violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const CoverageGraph& g = graphs[uniform_index(rng, graphs.size())];
    const CoverageReward r(g);
    const StateSet big = random_subset(rng, 40, 1 + uniform_index(rng, 15));
    std::vector<Element> keep;
    for (Element e : big)
      if (bernoulli(rng, 0.5)) keep.push_back(e);
    const StateSet small(keep);
    Element a = 0;
    do {
      a = static_cast<Element>(uniform_index(rng, 40));
    } while (big.contains(a));
    const auto k = [&](const StateSet& s) { return static_cast<long>(r.covered_count(s)); };
    if (k(small.with(a)) - k(small) < k(big.with(a)) - k(big)) ++violations;
  }
  return {violations == 0, "10000 triples on 20 graphs, " + std::to_string(violations) + " violations"};
}

Outcome oversampling() {
  Rng rng(99);
  std::size_t checked = 0, disagreements = 0, gap_misses = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t size = 2 + uniform_index(rng, 19);
    OptimisticTargets t;
    t.reward.resize(size);
    t.upper_bound.resize(size);
    for (std::size_t i = 0; i < size; ++i) {
      t.reward[i] = 0.01 + uniform01(rng);
      if (bernoulli(rng, 0.6)) t.upper_bound[i] = t.reward[i] + (bernoulli(rng, 0.2) ? 0.0 : 2.0 * uniform01(rng));
    }
    const auto p = target_distribution(t.reward);
    const auto q = biased_distribution(t);
    for (std::size_t x = 0; x < size; ++x) {
      if (!t.upper_bound[x]) continue;
      ++checked;
      const auto terms = oversampling_terms(t, x);
      const double diff = q[x] - p[x];
      if (std::fabs(diff - oversampling_gap(t, x)) > 1e-9) ++gap_misses;
      // the equivalence is tested wherever either side is decided beyond 1e-9
      if (std::fabs(diff) > 1e-9 && std::fabs(terms.lhs - terms.rhs) > 1e-9 &&
          ((terms.lhs >= terms.rhs) != (diff >= 0.0)))
        ++disagreements;
    }
  }
  return {disagreements == 0 && gap_misses == 0,
          std::to_string(checked) + " bounded terminals, " + std::to_string(disagreements) +
              " disagreements, " + std::to_string(gap_misses) + " closed-form misses"};
}

Outcome gradient_exactness() {
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + trial % 4, c = 2 + trial % 2;
    const ProblemInstance inst(n, c);
    Rng rng(3000 + trial);
    std::vector<double> feature;
    if (trial % 2)
      for (std::size_t i = 0; i < n; ++i) feature.push_back(uniform01(rng));
    Policy p(n, c, 6, 7, feature);
    p.initialize(rng, 0.8);
    for (Eigen::Index i = 0; i < p.output_weights().size(); ++i) p.output_weights()(i) = 0.7 * standard_normal(rng);
    p.log_z = standard_normal(rng);
    const StateSet chosen = random_subset(rng, n, c);
    const auto order = chosen.members();
    const Trajectory t(inst, std::vector<Element>(order.begin(), order.end()));
    const double signal = 0.1 + uniform01(rng);
    PolicyGradient g(p);
    tb_loss(PolicyEvaluator(p), t, signal, &g);
    const double h = 1e-5;
    // relative error with a 1e-5 floor: below it a step-1e-5 difference is at roundoff
    auto rel = [](double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-5}); };
    auto fd = [&](double& param) {
      const double keep = param;
      param = keep + h;
      const double up = tb_loss(PolicyEvaluator(p), t, signal);
      param = keep - h;
      const double down = tb_loss(PolicyEvaluator(p), t, signal);
      param = keep;
      return (up - down) / (2 * h);
    };
    for (Eigen::Index i = 0; i < p.parameters().size(); ++i) worst = std::max(worst, rel(g.theta(i), fd(p.parameters()(i))));
    worst = std::max(worst, rel(g.log_z, fd(p.log_z)));
  }
  return {worst < 1e-4, "max relative error " + fmt("%.3g", worst)};
}

struct DeskRun {
  std::uint64_t seed = 0;
  std::optional<TrainedRun> run;
  double seconds = 0.0;
};

std::vector<DeskRun> run_n10(const ExperimentConfig& cfg) {
  std::vector<DeskRun> runs(cfg.seeds.size());
  parallel_for(runs.size(), [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Task task = build_task(cfg.task, cfg.seeds[i]);
    const CoverageReward reward(task.graph, cfg.task.closed_neighborhood);
    TrainConfig tc = cfg.train;
    tc.variant = Variant::classical;
    tc.seed = cfg.seeds[i];
    const auto feature = cfg.degree_feature ? normalized_degree_feature(task.graph) : std::vector<double>{};
    runs[i].seed = cfg.seeds[i];
    runs[i].run.emplace(train(tc, task.instance, reward, feature));
    runs[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  return runs;
}

Outcome distribution_matching(const std::vector<DeskRun>& runs, std::uint64_t max_steps) {
  bool ok = true;
  std::ostringstream d;
  for (const auto& r : runs) {
    const auto& last = r.run->metrics.back();
    const bool pass = last.exact_tv && *last.exact_tv < 0.05 && r.run->steps <= max_steps && r.seconds < 300.0;
    ok = ok && pass;
    d << "seed " << r.seed << " TV " << fmt("%.4f", last.exact_tv.value_or(NAN)) << " at step " << r.run->steps
      << " (" << fmt("%.0f", r.seconds) << " s); ";
  }
  return {ok, d.str()};
}

Outcome fcs_sanity(const ExperimentConfig& cfg, const std::vector<DeskRun>& runs) {
  bool ok = true;
  std::ostringstream d;
  double worst_gap = 0.0;
  for (const auto& r : runs) {
    const Task task = build_task(cfg.task, r.seed);
    const CoverageReward reward(task.graph, cfg.task.closed_neighborhood);
    const double tv = exact_tv(r.run->policy, task.instance, reward);
    FcsConfig full = cfg.train.fcs;
    full.force_full = true;
    full.epochs = 1;
    Rng rng(derive_seed(r.seed, 12));
    worst_gap = std::max(worst_gap, std::fabs(fcs(r.run->policy, task.instance, reward, full, rng).value - tv));
    FcsConfig sampled = cfg.train.fcs;
    sampled.force_full = false;
    const double value = fcs(r.run->policy, task.instance, reward, sampled, rng).value;
    ok = ok && value < 0.05;
    d << "seed " << r.seed << " fcs " << fmt("%.4f", value) << "; ";
  }
  ok = ok && worst_gap <= 1e-9;
  d << "max |fcs_full - exact_tv| " << fmt("%.2g", worst_gap);
  return {ok, d.str()};
}

struct N60Runs {
  std::vector<std::uint64_t> seeds;
  // [variant][seed]
  std::vector<std::vector<std::optional<TrainedRun>>> runs;
};

N60Runs run_n60(const ExperimentConfig& cfg) {
  N60Runs out;
  out.seeds = cfg.seeds;
  const std::vector<Variant> variants{Variant::classical, Variant::subo, Variant::subo_f};
  out.runs.assign(variants.size(), std::vector<std::optional<TrainedRun>>(cfg.seeds.size()));
  parallel_for(variants.size() * cfg.seeds.size(), [&](std::size_t job) {
    const std::size_t v = job / cfg.seeds.size(), s = job % cfg.seeds.size();
    const Task task = build_task(cfg.task, cfg.seeds[s]);
    const CoverageReward reward(task.graph, cfg.task.closed_neighborhood);
    TrainConfig tc = cfg.train;
    tc.variant = variants[v];
    tc.seed = cfg.seeds[s];
    const auto feature = cfg.degree_feature ? normalized_degree_feature(task.graph) : std::vector<double>{};
    out.runs[v][s].emplace(train(tc, task.instance, reward, feature));
  });
  return out;
}

Outcome directional(const N60Runs& r) {
  const std::size_t k = r.seeds.size();
  double tv_exh[2] = {0, 0}, tv_end[2] = {0, 0}, top_classical = 0, top_f = 0;
  bool identical_steps = true;
  for (std::size_t s = 0; s < k; ++s) {
    for (int v = 0; v < 2; ++v) {
      const TrainedRun& run = *r.runs[v][s];
      tv_exh[v] += run.at_exhaustion->exact_tv.value() / k;
      tv_end[v] += run.metrics.back().exact_tv.value() / k;
    }
    top_classical += r.runs[0][s]->metrics.back().top_k_avg.value() / k;
    top_f += r.runs[2][s]->metrics.back().top_k_avg.value() / k;
    identical_steps = identical_steps && r.runs[0][s]->steps == r.runs[1][s]->steps &&
                      r.runs[0][s]->steps == r.runs[2][s]->steps;
  }
  const bool tv_ok = tv_exh[1] < tv_exh[0];
  const bool top_ok = top_f >= top_classical - 0.02;
  std::ostringstream d;
  d << "mean TV at exhaustion subo " << fmt("%.4f", tv_exh[1]) << " vs classical " << fmt("%.4f", tv_exh[0])
    << " (end of run " << fmt("%.4f", tv_end[1]) << " vs " << fmt("%.4f", tv_end[0]) << "); mean final top-"
    << "k subo_f " << fmt("%.4f", top_f) << " vs classical " << fmt("%.4f", top_classical)
    << (identical_steps ? "" : "; step counts differ");
  return {tv_ok && top_ok && identical_steps, d.str()};
}

Outcome data_efficiency(const N60Runs& r) {
  bool ok = true;
  std::ostringstream d;
  for (std::size_t s = 0; s < r.seeds.size(); ++s) {
    const TrainedRun& run = *r.runs[1][s];
    const auto& row = *run.at_exhaustion;
    const double ratio = static_cast<double>(row.coverage) / static_cast<double>(row.queries_used);
    ok = ok && ratio > 1.0;
    d << "seed " << r.seeds[s] << " coverage/queries " << fmt("%.1f", ratio) << "; ";
  }
  bool decreasing = true;
  for (std::uint64_t m : {2u, 5u, 10u, 20u}) {
    double prev = INFINITY;
    d << "m=" << m << ":";
    for (std::uint64_t c : {2u, 4u, 8u}) {
      const double ratio = mc_table(20, c, {m}, 0, 0, 1, true)[0].ratio;
      decreasing = decreasing && ratio < prev;
      prev = ratio;
      d << ' ' << fmt("%.3f", ratio);
    }
    d << "; ";
  }
  d << (decreasing ? "ratio decreases with C/N" : "ratio not decreasing");
  return {ok && decreasing, d.str()};
}

}  // namespace

int main() {
  int failures = 0;
  std::mutex out;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::lock_guard lock(out);
    std::printf("criterion %2d %s  %s [%.1f s]: %s\n", id, o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "counting exactness", counting_exactness);
  McGrid grid;
  report(2, "E[Q] agreement", [&] {
    grid = small_grid();
    return expected_q_agreement(grid);
  });
  report(3, "Janson validity", [&] { return janson_validity(grid); });
  report(4, "coverage bound", coverage_bound);
  report(5, "bound validity", bound_validity);
  report(6, "submodularity", submodularity);
  report(7, "oversampling", oversampling);
  report(8, "gradient exactness", gradient_exactness);

  std::vector<DeskRun> n10;
  ExperimentConfig n10_cfg;
  report(9, "distribution matching N=10", [&] {
    n10_cfg = desk_config("desk_n10_c3.conf");
    n10 = run_n10(n10_cfg);
    return distribution_matching(n10, 20000);
  });

  N60Runs n60;
  report(10, "directional N=60", [&] {
    n60 = run_n60(desk_config("desk_n60_c5.conf"));
    return directional(n60);
  });
  report(11, "data efficiency", [&] { return data_efficiency(n60); });
  report(12, "FCS sanity", [&] { return fcs_sanity(n10_cfg, n10); });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures ? 1 : 0;
}
