// Command-line front end: train, verify-counts, mc, gen-graph, eval.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "subo/experiment.hpp"

using namespace subo;

namespace {

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::uint64_t> query_budget;
  std::optional<std::string> variant;
  std::optional<double> epsilon;
  std::vector<std::string> set;
};

KeyValues overrides_from(const TrainArgs& a) {
  KeyValues kv;
  for (const std::string& item : a.set) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  // dedicated flags take precedence over --set
  if (a.seed) kv["experiment.seeds"] = std::to_string(*a.seed);
  if (a.out) kv["experiment.out"] = *a.out;
  if (a.query_budget) kv["train.query_budget"] = std::to_string(*a.query_budget);
  if (a.variant) kv["experiment.variants"] = *a.variant;
  if (a.epsilon) kv["train.epsilon"] = format_double(*a.epsilon);
  return kv;
}

ExperimentConfig load_config(const std::string& path, const KeyValues& overrides) {
  const std::filesystem::path p(path);
  const KeyValues kv = merge_key_values(load_key_values(p), overrides);
  return ExperimentConfig::from_key_values(kv, p.parent_path());
}

int cmd_train(const TrainArgs& a) {
  const KeyValues overrides = overrides_from(a);
  const ExperimentConfig cfg = load_config(a.config, overrides);
  const auto result = run_experiment(cfg, overrides, threads_from_env(), &std::cerr);
  std::cout << "wrote " << result.runs.size() << " runs and " << result.manifest.string() << '\n';
  return 0;
}

int cmd_eval(const std::string& config, const std::string& checkpoint, std::uint64_t seed) {
  const ExperimentConfig cfg = load_config(config, {});
  const MetricsRecord r = evaluate_checkpoint(cfg, checkpoint, seed);
  std::cout << "fcs,exact_tv\n"
            << (r.fcs ? format_double(*r.fcs) : "") << ',' << (r.exact_tv ? format_double(*r.exact_tv) : "")
            << '\n';
  return 0;
}

int cmd_mc(std::uint64_t n, const std::vector<std::uint64_t>& cs, const std::vector<std::uint64_t>& ms,
           std::uint64_t reps, std::uint64_t seed, bool analytic, const std::string& out_path) {
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  bool header = true;
  for (std::uint64_t c : cs) {
    write_mc_csv(out, mc_table(n, c, ms, reps, seed, threads_from_env(), analytic), header);
    header = false;
  }
  return 0;
}

int cmd_gen_graph(const std::string& kind, std::size_t n, double p, std::size_t attach, std::uint64_t seed,
                  const std::string& out_path) {
  CoverageGraph g;
  if (kind == "er") {
    g = generate_er(n, p, seed);
  } else if (kind == "ba") {
    g = generate_ba(n, attach, seed);
  } else if (kind == "path") {
    g = path_graph(n);
  } else {
    throw ConfigError("--kind must be er, ba or path");
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  write_edge_list(out, g);
  if (!out) throw std::runtime_error("write failed: " + out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bound-augmented GFlowNet training and verification"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train every configured (variant, seed) pair");
  train_cmd->add_option("--config", ta.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", ta.seed, "Run a single seed");
  train_cmd->add_option("--out", ta.out, "Output directory");
  train_cmd->add_option("--query-budget", ta.query_budget, "Query budget");
  train_cmd->add_option("--variant", ta.variant, "Variant list (classical, subo, subo_f)");
  train_cmd->add_option("--epsilon", ta.epsilon, "Exploration mix in [0, 1]");
  train_cmd->add_option("--set", ta.set, "Extra override key=value (repeatable)");

  std::uint64_t n_max = 8, c_max = 4;
  auto* verify_cmd = app.add_subcommand("verify-counts", "Check closed-form counts against enumeration");
  verify_cmd->add_option("--n-max", n_max, "Largest N")->capture_default_str();
  verify_cmd->add_option("--c-max", c_max, "Largest C")->capture_default_str();

  std::uint64_t mc_n = 4, mc_reps = 5000, mc_seed = 0;
  std::vector<std::uint64_t> mc_c{2}, mc_m{5, 12, 40};
  bool mc_analytic = false;
  std::string mc_out;
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo check of the bound-count theory");
  mc_cmd->add_option("--n", mc_n, "N")->capture_default_str();
  mc_cmd->add_option("--c", mc_c, "Cardinalities (comma separated)")->delimiter(',')->capture_default_str();
  mc_cmd->add_option("--m", mc_m, "Trajectory counts (comma separated)")->delimiter(',')->capture_default_str();
  mc_cmd->add_option("--reps", mc_reps, "Repetitions per m")->capture_default_str();
  mc_cmd->add_option("--seed", mc_seed, "Seed")->capture_default_str();
  mc_cmd->add_flag("--analytic", mc_analytic, "Closed-form columns only (no enumeration)");
  mc_cmd->add_option("--out", mc_out, "CSV path (default stdout)");

  std::string gg_kind = "er", gg_out;
  std::size_t gg_n = 10, gg_attach = 2;
  double gg_p = 0.3;
  std::uint64_t gg_seed = 0;
  auto* gen_cmd = app.add_subcommand("gen-graph", "Write a random graph as an edge list");
  gen_cmd->add_option("--kind", gg_kind, "er, ba or path")->capture_default_str();
  gen_cmd->add_option("--n", gg_n, "Vertices")->capture_default_str();
  gen_cmd->add_option("--p", gg_p, "ER edge probability")->capture_default_str();
  gen_cmd->add_option("--attach", gg_attach, "BA attachment count")->capture_default_str();
  gen_cmd->add_option("--seed", gg_seed, "Seed")->capture_default_str();
  gen_cmd->add_option("--out", gg_out, "Output path")->required();

  std::string ev_config, ev_checkpoint;
  std::uint64_t ev_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Recompute metrics from a policy checkpoint");
  eval_cmd->add_option("--config", ev_config, "Experiment config file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--checkpoint", ev_checkpoint, "Policy checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--seed", ev_seed, "Run seed (selects the graph when it is seed-generated)")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(ta);
    if (*verify_cmd) return verify_counts(n_max, c_max, std::cout) ? 0 : 1;
    if (*mc_cmd) return cmd_mc(mc_n, mc_c, mc_m, mc_reps, mc_seed, mc_analytic, mc_out);
    if (*gen_cmd) return cmd_gen_graph(gg_kind, gg_n, gg_p, gg_attach, gg_seed, gg_out);
    if (*eval_cmd) return cmd_eval(ev_config, ev_checkpoint, ev_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
