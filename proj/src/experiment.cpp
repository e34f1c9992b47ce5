#include "subo/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "subo/combinatorics.hpp"
#include "subo/pairing.hpp"

namespace subo {

namespace {

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::er: return "er";
    case TaskKind::ba: return "ba";
    case TaskKind::edge_list: return "edge_list";
  }
  return "unknown";
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "er") return TaskKind::er;
  if (s == "ba") return TaskKind::ba;
  if (s == "edge_list") return TaskKind::edge_list;
  throw ConfigError("task.kind: expected er, ba or edge_list, got '" + s + "'");
}

std::string to_string(Optimizer::Kind k) { return k == Optimizer::Kind::adam ? "adam" : "sgd"; }

Optimizer::Kind parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::Kind::sgd;
  if (s == "adam") return Optimizer::Kind::adam;
  throw ConfigError("train.optimizer: expected sgd or adam, got '" + s + "'");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

// Number of vertices of the task's graph without generating it.
std::size_t task_vertex_count(const TaskSpec& spec) {
  if (spec.kind != TaskKind::edge_list) return spec.n;
  return load_edge_list(spec.edge_list).graph.num_vertices();
}

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string run_stem(Variant v, std::uint64_t seed) { return to_string(v) + "_seed" + std::to_string(seed); }

nlohmann::ordered_json record_json(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["phase"] = r.phase;
  j["queries_used"] = r.queries_used;
  j["loss"] = r.loss;
  j["fcs"] = r.fcs ? nlohmann::ordered_json(*r.fcs) : nlohmann::ordered_json(nullptr);
  j["exact_tv"] = r.exact_tv ? nlohmann::ordered_json(*r.exact_tv) : nlohmann::ordered_json(nullptr);
  j["top_k_avg"] = r.top_k_avg ? nlohmann::ordered_json(*r.top_k_avg) : nlohmann::ordered_json(nullptr);
  j["num_bounds"] = r.num_bounds;
  j["coverage"] = r.coverage;
  return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto u = [](auto& field) {
    return Setter([&field](const std::string& k, const std::string& v) {
      field = static_cast<std::remove_reference_t<decltype(field)>>(parse_uint(k, v));
    });
  };
  auto d = [](double& field) {
    return Setter([&field](const std::string& k, const std::string& v) { field = parse_double(k, v); });
  };
  auto b = [](bool& field) {
    return Setter([&field](const std::string& k, const std::string& v) { field = parse_bool(k, v); });
  };
  const std::map<std::string, Setter> setters{
      {"task.kind", [&](auto&, const std::string& v) { cfg.task.kind = parse_task_kind(v); }},
      {"task.n", u(cfg.task.n)},
      {"task.p", d(cfg.task.edge_prob)},
      {"task.attach_count", u(cfg.task.attach_count)},
      {"task.path",
       [&](auto&, const std::string& v) {
         std::filesystem::path p(v);
         cfg.task.edge_list = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
       }},
      {"task.cardinality", u(cfg.task.cardinality)},
      {"task.graph_seed",
       [&](const std::string& k, const std::string& v) {
         if (v.empty() || v == "run") {
           cfg.task.graph_seed.reset();
         } else {
           cfg.task.graph_seed = parse_uint(k, v);
         }
       }},
      {"task.closed_neighborhood", b(cfg.task.closed_neighborhood)},
      {"experiment.variants",
       [&](auto&, const std::string& v) {
         cfg.variants.clear();
         for (const auto& name : split_list(v)) {
           try {
             cfg.variants.push_back(parse_variant(name));
           } catch (const std::invalid_argument& e) {
             throw ConfigError(std::string("experiment.variants: ") + e.what());
           }
         }
       }},
      {"experiment.seeds", [&](const std::string& k, const std::string& v) { cfg.seeds = parse_uint_list(k, v); }},
      {"experiment.out", [&](auto&, const std::string& v) { cfg.out_dir = v; }},
      {"experiment.degree_feature", b(cfg.degree_feature)},
      {"experiment.save_checkpoints", b(cfg.save_checkpoints)},
      {"train.query_budget", u(t.query_budget)},
      {"train.batch_size", u(t.batch_size)},
      {"train.lr_policy", d(t.lr_policy)},
      {"train.lr_log_z", d(t.lr_log_z)},
      {"train.optimizer", [&](auto&, const std::string& v) { t.optimizer = parse_optimizer(v); }},
      {"train.epsilon", d(t.epsilon)},
      {"train.mix_buffer_fraction", d(t.mix_buffer_fraction)},
      {"train.offline_steps", u(t.offline_steps)},
      {"train.total_steps",
       [&](const std::string& k, const std::string& v) {
         if (v.empty() || v == "none") {
           t.total_steps.reset();
         } else {
           t.total_steps = parse_uint(k, v);
         }
       }},
      {"train.max_online_steps", u(t.max_online_steps)},
      {"train.embed_dim", u(t.embed_dim)},
      {"train.hidden_dim", u(t.hidden_dim)},
      {"train.init_scale", d(t.init_scale)},
      {"train.buffer_capacity", u(t.buffer_capacity)},
      {"train.reward_floor", d(t.reward_floor)},
      {"eval.interval", u(t.eval_interval)},
      {"eval.top_k", u(t.top_k)},
      {"eval.fcs", b(t.eval_fcs)},
      {"eval.fcs_forward_samples", u(t.fcs.forward_samples)},
      {"eval.fcs_backward_samples", u(t.fcs.backward_samples)},
      {"eval.fcs_epochs", u(t.fcs.epochs)},
      {"eval.exact_tv", b(t.eval_exact_tv)},
      {"eval.max_terminals", u(t.exact_caps.max_terminals)},
      {"eval.max_cardinality", u(t.exact_caps.max_cardinality)},
  };
  for (const auto& [key, value] : kv) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key: " + key);
    it->second(key, value);
  }
  t.fcs.caps = t.exact_caps;
  return cfg;
}

KeyValues ExperimentConfig::to_key_values() const {
  std::vector<std::string> names;
  for (Variant v : variants) names.push_back(to_string(v));
  std::vector<std::string> seed_text;
  for (auto s : seeds) seed_text.push_back(std::to_string(s));
  const TrainConfig& t = train;
  return {
      {"task.kind", to_string(task.kind)},
      {"task.n", std::to_string(task.n)},
      {"task.p", format_double(task.edge_prob)},
      {"task.attach_count", std::to_string(task.attach_count)},
      {"task.path", task.edge_list.string()},
      {"task.cardinality", std::to_string(task.cardinality)},
      {"task.graph_seed", task.graph_seed ? std::to_string(*task.graph_seed) : "run"},
      {"task.closed_neighborhood", bool_text(task.closed_neighborhood)},
      {"experiment.variants", join(names)},
      {"experiment.seeds", join(seed_text)},
      {"experiment.out", out_dir.string()},
      {"experiment.degree_feature", bool_text(degree_feature)},
      {"experiment.save_checkpoints", bool_text(save_checkpoints)},
      {"train.query_budget", std::to_string(t.query_budget)},
      {"train.batch_size", std::to_string(t.batch_size)},
      {"train.lr_policy", format_double(t.lr_policy)},
      {"train.lr_log_z", format_double(t.lr_log_z)},
      {"train.optimizer", to_string(t.optimizer)},
      {"train.epsilon", format_double(t.epsilon)},
      {"train.mix_buffer_fraction", format_double(t.mix_buffer_fraction)},
      {"train.offline_steps", std::to_string(t.offline_steps)},
      {"train.total_steps", t.total_steps ? std::to_string(*t.total_steps) : "none"},
      {"train.max_online_steps", std::to_string(t.max_online_steps)},
      {"train.embed_dim", std::to_string(t.embed_dim)},
      {"train.hidden_dim", std::to_string(t.hidden_dim)},
      {"train.init_scale", format_double(t.init_scale)},
      {"train.buffer_capacity", std::to_string(t.buffer_capacity)},
      {"train.reward_floor", format_double(t.reward_floor)},
      {"eval.interval", std::to_string(t.eval_interval)},
      {"eval.top_k", std::to_string(t.top_k)},
      {"eval.fcs", bool_text(t.eval_fcs)},
      {"eval.fcs_forward_samples", std::to_string(t.fcs.forward_samples)},
      {"eval.fcs_backward_samples", std::to_string(t.fcs.backward_samples)},
      {"eval.fcs_epochs", std::to_string(t.fcs.epochs)},
      {"eval.exact_tv", bool_text(t.eval_exact_tv)},
      {"eval.max_terminals", std::to_string(t.exact_caps.max_terminals)},
      {"eval.max_cardinality", std::to_string(t.exact_caps.max_cardinality)},
  };
}

void ExperimentConfig::validate() const {
  if (variants.empty()) throw ConfigError("experiment.variants is empty");
  if (seeds.empty()) throw ConfigError("experiment.seeds is empty");
  if (task.kind == TaskKind::edge_list && !std::filesystem::exists(task.edge_list))
    throw ConfigError("task.path does not exist: " + task.edge_list.string());
  if (task.kind == TaskKind::er && !(task.edge_prob >= 0.0 && task.edge_prob <= 1.0))
    throw ConfigError("task.p must lie in [0, 1]");
  if (task.kind == TaskKind::ba && (task.attach_count == 0 || task.attach_count >= task.n))
    throw ConfigError("task.attach_count must lie in [1, n)");
  const std::size_t n = task_vertex_count(task);
  if (task.cardinality == 0 || 2 * task.cardinality > n)
    throw ConfigError("task.cardinality must satisfy 1 <= C <= N/2 (N = " + std::to_string(n) + ")");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Task build_task(const TaskSpec& spec, std::uint64_t run_seed) {
  const std::uint64_t gseed = spec.graph_seed.value_or(run_seed);
  CoverageGraph g;
  switch (spec.kind) {
    case TaskKind::er: g = generate_er(spec.n, spec.edge_prob, gseed); break;
    case TaskKind::ba: g = generate_ba(spec.n, spec.attach_count, gseed); break;
    case TaskKind::edge_list: g = load_edge_list(spec.edge_list).graph; break;
  }
  const std::size_t n = g.num_vertices();
  return Task{std::move(g), ProblemInstance(n, spec.cardinality), gseed};
}

std::string metrics_csv_header() { return "step,phase,queries_used,loss,fcs,exact_tv,top_k_avg,num_bounds,coverage"; }

std::string metrics_csv_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.step) + ',' + r.phase + ',' + std::to_string(r.queries_used) + ',';
  row += (std::isnan(r.loss) ? std::string() : format_double(r.loss)) + ',';
  row += optional_field(r.fcs) + ',' + optional_field(r.exact_tv) + ',' + optional_field(r.top_k_avg) + ',';
  row += std::to_string(r.num_bounds) + ',' + std::to_string(r.coverage);
  return row;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << metrics_csv_header() << '\n';
  for (const auto& r : records) out << metrics_csv_row(r) << '\n';
}

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("sha1: context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha1: digest failed");
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
  return hex.str();
}

std::string git_blob_sha1_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return git_blob_sha1(buf.str());
}

unsigned threads_from_env() {
  if (const char* env = std::getenv("SUBO_THREADS")) {
    try {
      const auto v = parse_uint("SUBO_THREADS", env);
      if (v > 0) return static_cast<unsigned>(std::min<std::uint64_t>(v, 1024));
    } catch (const ConfigError&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentResult run_experiment(const ExperimentConfig& config, const KeyValues& overrides, unsigned threads,
                                std::ostream* log) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);

  struct Job {
    Variant variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Variant v : config.variants)
    for (std::uint64_t s : config.seeds) jobs.push_back({v, s});

  std::vector<RunSummary> runs(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        const Task task = build_task(config.task, job.seed);
        const CoverageReward reward(task.graph, config.task.closed_neighborhood);
        TrainConfig tc = config.train;
        tc.variant = job.variant;
        tc.seed = job.seed;
        const auto feature = config.degree_feature ? normalized_degree_feature(task.graph) : std::vector<double>{};
        const TrainedRun run = train(tc, task.instance, reward, feature);

        RunSummary& s = runs[i];
        s.variant = job.variant;
        s.seed = job.seed;
        s.graph_seed = task.graph_seed;
        s.steps = run.steps;
        s.queries_used = run.queries_used;
        s.exhausted_at_step = run.exhausted_at_step;
        s.at_exhaustion = run.at_exhaustion;
        s.final_record = run.metrics.back();
        const std::string stem = run_stem(job.variant, job.seed);
        s.csv = config.out_dir / (stem + ".csv");
        {
          std::ostringstream csv;
          write_metrics_csv(csv, run.metrics);
          std::ofstream out(s.csv, std::ios::binary);
          out << csv.str();
          if (!out) throw std::runtime_error("cannot write " + s.csv.string());
          s.csv_sha1 = git_blob_sha1(csv.str());
        }
        if (config.save_checkpoints) {
          s.checkpoint = config.out_dir / (stem + ".policy");
          std::ofstream out(s.checkpoint);
          run.policy.save(out);
        }
        if (log) {
          std::lock_guard lock(log_mutex);
          *log << stem << ": steps " << run.steps << ", queries " << run.queries_used << ", final exact_tv "
               << optional_field(s.final_record.exact_tv) << ", coverage " << s.final_record.coverage << '\n';
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned pool_size = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (pool_size == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < pool_size; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  nlohmann::ordered_json manifest;
  const KeyValues resolved = config.to_key_values();
  std::ostringstream resolved_text;
  write_key_values(resolved_text, resolved);
  manifest["config"] = resolved;
  manifest["config_sha1"] = git_blob_sha1(resolved_text.str());
  manifest["overrides"] = overrides;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  if (config.task.kind == TaskKind::edge_list)
    inputs[config.task.edge_list.string()] = git_blob_sha1_file(config.task.edge_list);
  manifest["inputs"] = inputs;
  nlohmann::ordered_json run_list = nlohmann::ordered_json::array();
  for (const auto& s : runs) {
    nlohmann::ordered_json j;
    j["variant"] = to_string(s.variant);
    j["seed"] = s.seed;
    j["graph_seed"] = s.graph_seed;
    j["csv"] = s.csv.filename().string();
    j["csv_sha1"] = s.csv_sha1;
    if (!s.checkpoint.empty()) j["checkpoint"] = s.checkpoint.filename().string();
    j["steps"] = s.steps;
    j["queries_used"] = s.queries_used;
    j["exhausted_at_step"] = s.exhausted_at_step ? nlohmann::ordered_json(*s.exhausted_at_step) : nullptr;
    j["at_exhaustion"] = s.at_exhaustion ? record_json(*s.at_exhaustion) : nullptr;
    j["final"] = record_json(s.final_record);
    run_list.push_back(std::move(j));
  }
  manifest["runs"] = run_list;

  ExperimentResult result;
  result.runs = std::move(runs);
  result.manifest = config.out_dir / "manifest.json";
  std::ofstream out(result.manifest, std::ios::binary);
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + result.manifest.string());
  return result;
}

MetricsRecord evaluate_checkpoint(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                                  std::uint64_t seed) {
  std::ifstream in(checkpoint);
  if (!in) throw std::runtime_error("cannot open checkpoint " + checkpoint.string());
  const Policy policy = Policy::load(in);
  const Task task = build_task(config.task, seed);
  if (policy.num_elements() != task.instance.num_elements() || policy.cardinality() != task.instance.cardinality())
    throw ConfigError("checkpoint does not match the configured task");
  const CoverageReward reward(task.graph, config.task.closed_neighborhood);
  const TrainConfig& t = config.train;

  MetricsRecord r;
  r.phase = "eval";
  r.loss = std::numeric_limits<double>::quiet_NaN();
  if (t.eval_fcs) {
    Rng rng(derive_seed(seed, 3));
    const auto res = fcs(policy, task.instance, reward, t.fcs, rng);
    if (res.epochs_used) r.fcs = res.value;
  }
  if (t.eval_exact_tv) {
    try {
      r.exact_tv = exact_tv(policy, task.instance, reward, t.exact_caps);
    } catch (const EnumerationCapExceeded&) {
    }
  }
  return r;
}

bool verify_counts(std::uint64_t n_max, std::uint64_t c_max, std::ostream& out) {
  out << "N,C,lambda,lambda_oracle,alpha,alpha_oracle,beta,beta_oracle,phi,phi_oracle,phi_final_line,"
         "edges,edges_oracle,status\n";
  for (std::uint64_t n = 2; n <= n_max; ++n) {
    for (std::uint64_t c = 1; c <= std::min(c_max, n / 2); ++c) {
      const PairingGraphStats cf = closed_form_stats(n, c);
      const PairingOracleStats oracle = oracle_pairing_stats(n, c);
      const PairingGraphStats& o = oracle.stats;
      const bool ok = cf.lambda == o.lambda && cf.alpha == o.alpha && cf.beta == o.beta && cf.phi == o.phi &&
                      cf.edge_count == o.edge_count;
      out << n << ',' << c << ',' << cf.lambda << ',' << o.lambda << ',' << cf.alpha << ',' << o.alpha << ','
          << cf.beta << ',' << o.beta << ',' << cf.phi << ',' << o.phi << ',' << phi_count_expanded(n, c) << ','
          << cf.edge_count << ',' << o.edge_count << ',' << (ok ? "OK" : "MISMATCH") << '\n';
      if (!ok) {
        out << "mismatch at N=" << n << " C=" << c << '\n';
        return false;
      }
    }
  }
  return true;
}

std::vector<McRow> mc_table(std::uint64_t n, std::uint64_t c, const std::vector<std::uint64_t>& m_list,
                            std::uint64_t repetitions, std::uint64_t seed, unsigned threads, bool analytic_only) {
  if (c == 0 || c > n) throw std::invalid_argument("mc: need 1 <= C <= N");
  std::optional<PairingOracleStats> oracle;
  if (!analytic_only) oracle = oracle_pairing_stats(n, c);
  std::vector<McRow> rows;
  for (std::uint64_t m : m_list) {
    McRow row;
    row.n = n;
    row.c = c;
    row.m = m;
    const auto md = static_cast<double>(m);
    row.expected_q = expected_q(n, c, md);
    row.janson_lower = janson_lower_bound(n, c, md);
    row.coverage_lower = expected_coverage_lower(n, c, md);
    row.ratio = m ? row.coverage_lower / (md * static_cast<double>(c)) : 0.0;
    if (oracle) {
      row.janson_lower_full = janson_lower_bound_full(*oracle, md);
      row.mc = mc_bound_experiment(n, c, m, repetitions, derive_seed(seed, m), threads);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string mc_csv_header() {
  return "m,expected_Q,mc_Q,mc_Q_se,janson_lower,mc_p_positive,coverage_lower,mc_coverage,mc_coverage_se,"
         "mc_p_positive_se,janson_lower_full,mc_usable_coverage,ratio,n,c";
}

void write_mc_csv(std::ostream& out, const std::vector<McRow>& rows, bool header) {
  if (header) out << mc_csv_header() << '\n';
  for (const auto& r : rows) {
    auto mc = [&](auto getter) { return r.mc ? format_double(getter(*r.mc)) : std::string(); };
    out << r.m << ',' << format_double(r.expected_q) << ',' << mc([](const McResult& x) { return x.q.mean; }) << ','
        << mc([](const McResult& x) { return x.q.se; }) << ',' << format_double(r.janson_lower) << ','
        << mc([](const McResult& x) { return x.p_positive.mean; }) << ',' << format_double(r.coverage_lower) << ','
        << mc([](const McResult& x) { return x.coverage.mean; }) << ','
        << mc([](const McResult& x) { return x.coverage.se; }) << ','
        << mc([](const McResult& x) { return x.p_positive.se; }) << ',' << optional_field(r.janson_lower_full)
        << ',' << mc([](const McResult& x) { return x.usable_coverage.mean; }) << ',' << format_double(r.ratio)
        << ',' << r.n << ',' << r.c << '\n';
  }
}

}  // namespace subo
