// Experiment runner: train, eval, safesets, summarize.
// Exit codes: 0 ok, 1 runtime failure, 2 config or usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "sgpg/experiment.hpp"

namespace fs = std::filesystem;
using namespace sgpg;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kConfig = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "3" or "1..10" (inclusive).
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      out.push_back(std::stoull(s));
      return out;
    }
    const std::uint64_t lo = std::stoull(s.substr(0, dots));
    const std::uint64_t hi = std::stoull(s.substr(dots + 2));
    if (hi < lo || hi - lo > 10'000) throw UsageError("bad seed range '" + s + "'");
    for (std::uint64_t k = lo; k <= hi; ++k) out.push_back(k);
  } catch (const std::logic_error&) {
    throw UsageError("bad seed range '" + s + "', expected N or A..B");
  }
  return out;
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(8) << x;
  return os.str();
}

struct TrainArgs {
  std::string config;
  std::string out = "runs";
  std::string seeds;
  bool no_guide = false;
  long long batches = 0;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg = load_experiment(a.config);
  if (a.batches > 0) cfg.train.n_batches = static_cast<std::size_t>(a.batches);
  const std::vector<std::uint64_t> seeds =
      a.seeds.empty() ? std::vector<std::uint64_t>{cfg.train.seed} : parse_seeds(a.seeds);
  const bool guided = cfg.guide_enabled && !a.no_guide;
  for (std::uint64_t seed : seeds) {
    cfg.train.seed = seed;
    const fs::path dir = fs::path(a.out) / (cfg.name + (guided ? "_guided" : "_vanilla")) /
                         ("seed_" + std::to_string(seed));
    RunOptions opts{dir.string(), guided, a.quiet ? nullptr : &std::cerr};
    const RunResult r = run_training(cfg, opts);
    std::cout << dir.string() << " batches " << r.rows.size() << " violations "
              << r.total_violations << "\n";
  }
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::string env;
  bool with_guide = false;
  bool without_guide = false;
  std::size_t episodes = 50;
  std::uint64_t seed = 1'000'003;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  if (a.with_guide && a.without_guide) throw UsageError("--with-guide and --without-guide are exclusive");
  if (a.config.empty() == a.env.empty()) throw UsageError("give exactly one of --config or --env");
  ExperimentConfig cfg;
  if (!a.config.empty()) {
    cfg = load_experiment(a.config);
  } else {
    cfg.env = env_by_name(a.env);
    if (cfg.env.name == "planar_quadrotor") {
      cfg.guide.horizon = 15;
      cfg.guide.eps = 0.01;
    }
  }
  const MlpPolicy policy = MlpPolicy::load_file(a.checkpoint);
  if (policy.arch().input != cfg.env.sys.state_dim() || policy.arch().output != cfg.env.sys.action_dim())
    throw UsageError("checkpoint dims " + std::to_string(policy.arch().input) + "->" +
                     std::to_string(policy.arch().output) + " do not match env '" + cfg.env.name + "' (" +
                     std::to_string(cfg.env.sys.state_dim()) + "->" + std::to_string(cfg.env.sys.action_dim()) + ")");
  std::optional<SafetyGuide> guide;
  if (a.with_guide) {
    const SafeSetReport sets = resolve_safe_sets(cfg);
    guide.emplace(cfg.env.sys, guide_config(cfg, sets.sets));
  }
  const EvalMetrics m = evaluate(policy, guide ? &*guide : nullptr, cfg.env, a.episodes, a.seed,
                                 cfg.train.max_episode_len);
  std::ostringstream csv;
  csv << "checkpoint,env,guide,episodes,mean_reward,mean_length,violation_rate,mean_d\n"
      << a.checkpoint << ',' << cfg.env.name << ',' << (guide ? "on" : "off") << ',' << m.episodes << ','
      << num(m.mean_reward) << ',' << num(m.mean_length) << ',' << num(m.violation_rate) << ','
      << (guide ? num(m.mean_d) : std::string("nan")) << '\n';
  std::cout << csv.str();
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw std::runtime_error("cannot write " + a.out);
    f << csv.str();
  }
  return kOk;
}

int cmd_safesets(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = load_experiment(config);
  const SafeSetReport rep = resolve_safe_sets(cfg);
  std::ostringstream report;
  report << "env " << cfg.env.name << "\n"
         << "delta " << cfg.sets.delta << "\n"
         << "terminal " << cfg.sets.terminal << "\n"
         << "safe_rows " << rep.sets.safe.rows() << "\n"
         << "terminal_rows " << rep.sets.terminal.rows() << "\n"
         << "terminal_invariant " << (rep.terminal_invariant ? "pass" : "fail") << "\n"
         << "terminal_inside_safe " << (rep.terminal_inside_safe ? "pass" : "fail") << "\n"
         << "result " << (rep.ok() ? "pass" : "fail") << "\n";
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream(fs::path(out) / "safe_set.txt") << format_polytope(rep.sets.safe);
    std::ofstream(fs::path(out) / "terminal_set.txt") << format_polytope(rep.sets.terminal);
    std::ofstream(fs::path(out) / "report.txt") << report.str();
  }
  std::cout << report.str();
  return rep.ok() ? kOk : kRuntime;
}

struct SummarizeArgs {
  std::vector<std::string> csvs;
  std::string column = "eval_reward";
  std::string rank = "eval_reward";
  std::size_t top_k = 0;
  std::string out;
};

int cmd_summarize(const SummarizeArgs& a) {
  std::vector<MetricsTable> runs;
  for (const std::string& p : a.csvs) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.path().filename() == "metrics.csv") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      for (const auto& f : found) runs.push_back(read_metrics_csv(f.string()));
    } else {
      runs.push_back(read_metrics_csv(p));
    }
  }
  if (runs.empty()) throw UsageError("no metrics.csv files found");
  const auto kept = top_k_runs(runs, a.rank, a.top_k);
  std::ostringstream csv;
  csv << "batch,env_steps,mean,std,runs\n";
  for (const CurvePoint& p : summarize_column(kept, a.column))
    csv << p.batch << ',' << num(p.env_steps) << ',' << num(p.mean) << ',' << num(p.std) << ',' << p.runs
        << '\n';
  std::cerr << "kept " << kept.size() << " of " << runs.size() << " runs:";
  for (const auto& k : kept) std::cerr << ' ' << k.source;
  std::cerr << '\n';
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(a.out);
    if (!f) throw std::runtime_error("cannot write " + a.out);
    f << csv.str();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety-guided policy gradient for linear systems"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a policy (one run per seed)");
  train->add_option("config", ta.config, "Experiment file")->required();
  train->add_option("-o,--out", ta.out, "Root directory for run directories");
  train->add_option("--seeds", ta.seeds, "Seed or inclusive range A..B");
  train->add_flag("--no-guide", ta.no_guide, "Train the vanilla baseline");
  train->add_option("--batches", ta.batches, "Override train.n_batches");
  train->add_flag("-q,--quiet", ta.quiet, "No per-batch log");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with deterministic actions");
  eval->add_option("checkpoint", ea.checkpoint, "Policy checkpoint")->required();
  eval->add_option("--config", ea.config, "Experiment file (env, safe sets, guide)");
  eval->add_option("--env", ea.env, "Built-in env with default guide settings");
  eval->add_flag("--with-guide", ea.with_guide, "Pass actions through the safety guide");
  eval->add_flag("--without-guide", ea.without_guide, "Run the bare policy (default)");
  eval->add_option("-n,--episodes", ea.episodes, "Episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", ea.seed, "Evaluation seed");
  eval->add_option("-o,--out", ea.out, "Also write the metrics CSV here");

  std::string ss_config, ss_out;
  auto* safesets = app.add_subcommand("safesets", "Build, shrink and verify S and S_T");
  safesets->add_option("config", ss_config, "Experiment file")->required();
  safesets->add_option("-o,--out", ss_out, "Directory for the polytope files and report");

  SummarizeArgs sa;
  auto* summarize = app.add_subcommand("summarize", "Mean and std curves across runs");
  summarize->add_option("inputs", sa.csvs, "metrics.csv files or directories")->required();
  summarize->add_option("--column", sa.column, "Column to summarize");
  summarize->add_option("--rank", sa.rank, "Column whose run average ranks runs");
  summarize->add_option("--top-k", sa.top_k, "Keep the best k runs (0 keeps all)");
  summarize->add_option("-o,--out", sa.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(ea);
    if (*safesets) return cmd_safesets(ss_config, ss_out);
    if (*summarize) return cmd_summarize(sa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const PolytopeError& e) {
    std::cerr << "safe set error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
