#include "sgpg/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sgpg {

namespace fs = std::filesystem;

namespace {

std::size_t positive_count(const Config& c, const std::string& key, long long fallback) {
  const long long v = c.integer(key, fallback);
  if (v < 1) throw ConfigError(key, c.has(key) ? c.at(key).line : 0, "must be >= 1");
  return static_cast<std::size_t>(v);
}

Polytope rows_or_throw(const Config& c, const std::string& key, std::size_t dim) {
  try {
    return parse_polytope_rows(c.strings(key), dim);
  } catch (const PolytopeError& e) {
    throw ConfigError(key, c.at(key).line, e.what());
  }
}

EnvSpec custom_env(const Config& c) {
  const Matrix a = c.matrix("env.A");
  const Matrix b = c.matrix("env.B");
  if (a.rows() != a.cols()) throw ConfigError("env.A", c.at("env.A").line, "A must be square");
  if (b.rows() != a.rows()) throw ConfigError("env.B", c.at("env.B").line, "B must have as many rows as A");
  EnvSpec e{.name = c.string("env.name"), .sys = LinearSystem(a, b, c.number("env.dt", 0.0))};
  const std::string reward = c.string("env.reward", "velocity_squared");
  if (reward == "velocity_squared") {
    e.reward = RewardKind::velocity_squared;
  } else if (reward == "quadrotor") {
    e.reward = RewardKind::quadrotor;
  } else {
    throw ConfigError("env.reward", c.at("env.reward").line, "unknown reward '" + reward + "'");
  }
  const std::string term = c.string("env.termination", "leave_bounds");
  if (term == "leave_bounds") {
    e.termination = TerminationKind::leave_bounds;
    e.bounds = rows_or_throw(c, "env.bounds", a.rows());
  } else if (term == "quadrotor") {
    e.termination = TerminationKind::quadrotor;
  } else {
    throw ConfigError("env.termination", c.at("env.termination").line, "unknown termination '" + term + "'");
  }
  e.action_lo = c.vector("env.action_lo");
  e.action_hi = c.vector("env.action_hi");
  e.init_lo = c.vector("env.init_lo");
  e.init_hi = c.vector("env.init_hi");
  return e;
}

std::vector<std::string> optional_strings(const Config& c, const std::string& key) {
  return c.has(key) ? c.strings(key) : std::vector<std::string>{};
}


std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

double mean_finite(const std::vector<double>& xs) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : xs)
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  return n ? s / static_cast<double>(n) : NAN;
}

}  // namespace

ExperimentConfig experiment_from_config(const Config& c) {
  c.reject_unknown("experiment", {"name", "seed", "checkpoint_every"});
  c.reject_unknown("env", {"name", "max_episode_len", "A", "B", "dt", "reward", "termination",
                           "bounds", "action_lo", "action_hi", "init_lo", "init_hi", "tilt_limit"});
  c.reject_unknown("safesets", {"delta", "terminal", "safe_rows", "terminal_rows"});
  c.reject_unknown("guide", {"enabled", "horizon", "eps", "slack_weight", "sigma_floor", "kkt_tol",
                             "max_newton_iter", "mu0", "mu_factor"});
  c.reject_unknown("train", {"optimizer", "gamma", "beta", "lr", "batch_steps", "n_batches",
                             "max_episode_len"});
  c.reject_unknown("eval", {"episodes", "every", "with_guide", "seed"});

  ExperimentConfig x;
  x.source = c.source();
  x.name = c.string("experiment.name", "experiment");
  x.train.seed = static_cast<std::uint64_t>(c.integer("experiment.seed", 1));
  x.checkpoint_every = static_cast<std::size_t>(std::max(0LL, c.integer("experiment.checkpoint_every", 10)));

  const std::string env_name = c.string("env.name");
  if (c.has("env.A")) {
    x.env = custom_env(c);
  } else {
    try {
      x.env = env_by_name(env_name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("env.name", c.at("env.name").line, e.what());
    }
  }
  x.env.max_episode_len = positive_count(c, "env.max_episode_len", static_cast<long long>(x.env.max_episode_len));
  x.env.tilt_limit = c.number("env.tilt_limit", x.env.tilt_limit);
  try {
    validate(x.env);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("env", 0, e.what());
  }

  x.sets.delta = c.number("safesets.delta", 0.1);
  if (!(x.sets.delta >= 0.0 && x.sets.delta < 1.0))
    throw ConfigError("safesets.delta", c.at("safesets.delta").line, "must lie in [0, 1)");
  x.sets.terminal = c.string("safesets.terminal", "default");
  if (x.sets.terminal != "default" && x.sets.terminal != "computed" && x.sets.terminal != "rows")
    throw ConfigError("safesets.terminal", c.at("safesets.terminal").line,
                      "expected \"default\", \"computed\" or \"rows\"");
  x.sets.safe_rows = optional_strings(c, "safesets.safe_rows");
  x.sets.terminal_rows = optional_strings(c, "safesets.terminal_rows");
  if (x.sets.terminal == "rows" && x.sets.terminal_rows.empty())
    throw ConfigError("safesets.terminal_rows", 0, "required when terminal = \"rows\"");
  const std::size_t n = x.env.sys.state_dim();
  if (!x.sets.safe_rows.empty()) rows_or_throw(c, "safesets.safe_rows", n);
  if (!x.sets.terminal_rows.empty()) rows_or_throw(c, "safesets.terminal_rows", n);

  x.guide_enabled = c.boolean("guide.enabled", true);
  GuideConfig& g = x.guide;
  g.horizon = static_cast<unsigned>(positive_count(c, "guide.horizon", g.horizon));
  g.eps = c.number("guide.eps", g.eps);
  if (!(g.eps > 0.0 && g.eps < 1.0)) throw ConfigError("guide.eps", c.at("guide.eps").line, "must lie in (0, 1)");
  g.slack_weight = c.number("guide.slack_weight", g.slack_weight);
  g.sigma_floor = c.number("guide.sigma_floor", g.sigma_floor);
  g.kkt_tol = c.number("guide.kkt_tol", g.kkt_tol);
  g.max_newton_iter = static_cast<int>(positive_count(c, "guide.max_newton_iter", g.max_newton_iter));
  g.mu0 = c.number("guide.mu0", g.mu0);
  g.mu_factor = c.number("guide.mu_factor", g.mu_factor);

  TrainConfig& t = x.train;
  const std::string opt = c.string("train.optimizer", "adam");
  if (opt == "adam") {
    t.optimizer = OptimizerKind::adam;
  } else if (opt == "sgd") {
    t.optimizer = OptimizerKind::sgd;
  } else {
    throw ConfigError("train.optimizer", c.at("train.optimizer").line, "expected \"adam\" or \"sgd\"");
  }
  t.gamma = c.number("train.gamma", t.gamma);
  t.beta = c.number("train.beta", t.beta);
  t.lr = c.number("train.lr", t.lr);
  t.batch_steps = positive_count(c, "train.batch_steps", static_cast<long long>(t.batch_steps));
  t.n_batches = positive_count(c, "train.n_batches", static_cast<long long>(t.n_batches));
  t.max_episode_len = static_cast<std::size_t>(std::max(0LL, c.integer("train.max_episode_len", 0)));
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("train", 0, e.what());
  }

  x.eval.episodes = positive_count(c, "eval.episodes", static_cast<long long>(x.eval.episodes));
  x.eval.every = static_cast<std::size_t>(std::max(0LL, c.integer("eval.every", 1)));
  x.eval.with_guide = c.boolean("eval.with_guide", false);
  x.eval.seed = static_cast<std::uint64_t>(c.integer("eval.seed", static_cast<long long>(x.eval.seed)));
  return x;
}

ExperimentConfig load_experiment(const std::string& path) { return experiment_from_config(Config::load(path)); }

SafeSetReport resolve_safe_sets(const ExperimentConfig& cfg) {
  const EnvSpec& env = cfg.env;
  const std::size_t n = env.sys.state_dim();
  const double delta = cfg.sets.delta;
  SafeSetReport rep;
  const bool builtin_safe = cfg.sets.safe_rows.empty();

  if (builtin_safe && cfg.sets.terminal == "default") {
    rep.sets = default_safe_sets(env, delta);
  } else {
    const Polytope s_true = builtin_safe ? normalize(env.bounds)
                                         : normalize(parse_polytope_rows(cfg.sets.safe_rows, n));
    Polytope t_true;
    if (cfg.sets.terminal == "rows") {
      t_true = normalize(parse_polytope_rows(cfg.sets.terminal_rows, n));
    } else if (cfg.sets.terminal == "computed") {
      t_true = normalize(compute_invariant_set(env.sys, s_true, env.action_box()));
    } else {
      throw PolytopeError("safe sets: terminal = \"default\" needs the built-in safe set");
    }
    rep.sets = {shrink(s_true, delta), shrink(t_true, delta)};
  }
  rep.terminal_invariant = verify_invariance(env.sys, rep.sets.terminal, env.action_box());
  rep.terminal_inside_safe = is_subset(rep.sets.terminal, rep.sets.safe);
  return rep;
}

GuideConfig guide_config(const ExperimentConfig& cfg, const SafeSets& sets) {
  GuideConfig g = cfg.guide;
  g.safe = sets.safe;
  g.terminal = sets.terminal;
  g.action_box = cfg.env.action_box();
  return g;
}

const char* const kMetricsHeader =
    "batch,env_steps,mean_episode_reward,mean_episode_length,episodes,violations,mean_kl,mean_d,"
    "slack_events,guide_failures,guide_interventions,grad_norm,surrogate,eval_reward,eval_length,"
    "eval_violation_rate,eval_mean_d,wall_time";

std::string metrics_csv_row(const BatchRow& r) {
  const BatchMetrics& m = r.metrics;
  std::ostringstream os;
  os << r.batch << ',' << r.env_steps << ',' << fmt(m.mean_episode_reward) << ','
     << fmt(m.mean_episode_length) << ',' << m.episodes << ',' << m.violations << ','
     << fmt(m.mean_kl) << ',' << fmt(m.mean_d) << ',' << m.slack_events << ','
     << m.guide_failures << ',' << m.guide_interventions << ',' << fmt(r.update.grad_norm) << ','
     << fmt(r.update.surrogate) << ',';
  if (r.eval) {
    os << fmt(r.eval->mean_reward) << ',' << fmt(r.eval->mean_length) << ','
       << fmt(r.eval->violation_rate) << ',' << fmt(r.eval->mean_d);
  } else {
    os << "nan,nan,nan,nan";
  }
  os << ',' << fmt(r.wall_time);
  return os.str();
}

RunResult run_training(const ExperimentConfig& cfg, const RunOptions& opts) {
  const SafeSetReport sets = resolve_safe_sets(cfg);
  if (!sets.ok())
    throw PolytopeError("safe sets failed verification (invariant: " +
                        std::string(sets.terminal_invariant ? "yes" : "no") +
                        ", S_T inside S: " + (sets.terminal_inside_safe ? "yes" : "no") + ")");
  const bool use_guide = opts.use_guide && cfg.guide_enabled;
  std::optional<SafetyGuide> guide;
  // The guide is always built so evaluation "with guide" works for vanilla runs too.
  guide.emplace(cfg.env.sys, guide_config(cfg, sets.sets));

  std::ofstream csv;
  if (!opts.run_dir.empty()) {
    fs::create_directories(opts.run_dir);
    std::ofstream(fs::path(opts.run_dir) / "config.toml")
        << "# resolved: seed = " << cfg.train.seed << ", guide = " << (use_guide ? "on" : "off")
        << "\n" << cfg.source;
    std::ofstream(fs::path(opts.run_dir) / "safe_set.txt") << format_polytope(sets.sets.safe);
    std::ofstream(fs::path(opts.run_dir) / "terminal_set.txt") << format_polytope(sets.sets.terminal);
    csv.open(fs::path(opts.run_dir) / "metrics.csv");
    if (!csv) throw std::runtime_error("cannot write " + (fs::path(opts.run_dir) / "metrics.csv").string());
    csv << kMetricsHeader << '\n';
  }

  std::mt19937_64 rng(cfg.train.seed);
  const PolicyArch arch{cfg.env.sys.state_dim(), cfg.env.sys.action_dim()};
  RunResult res{{}, MlpPolicy::initialized(arch, rng), 0};
  Optimizer opt(cfg.train.optimizer, cfg.train.lr, res.policy.num_params());
  std::size_t env_steps = 0;

  for (std::size_t b = 0; b < cfg.train.n_batches; ++b) {
    const auto t0 = std::chrono::steady_clock::now();
    BatchRow row;
    row.batch = b;
    const Batch batch = collect_batch(res.policy, use_guide ? &*guide : nullptr, cfg.env, cfg.train, rng);
    row.metrics = batch.metrics;
    row.update = update(res.policy, batch, cfg.train, opt);
    env_steps += batch.metrics.steps;
    row.env_steps = env_steps;
    res.total_violations += batch.metrics.violations;
    if (cfg.eval.every > 0 && ((b + 1) % cfg.eval.every == 0 || b + 1 == cfg.train.n_batches)) {
      row.eval = evaluate(res.policy, cfg.eval.with_guide ? &*guide : nullptr, cfg.env,
                          cfg.eval.episodes, cfg.eval.seed, cfg.train.max_episode_len);
    }
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (csv.is_open()) {
      csv << metrics_csv_row(row) << '\n';
      csv.flush();
      if (cfg.checkpoint_every > 0 && (b + 1) % cfg.checkpoint_every == 0)
        res.policy.save_file((fs::path(opts.run_dir) / ("checkpoint_" + std::to_string(b + 1) + ".sgpg")).string());
    }
    if (opts.log) {
      *opts.log << cfg.name << " seed " << cfg.train.seed << " batch " << b + 1 << "/"
                << cfg.train.n_batches << " steps " << env_steps << " reward "
                << fmt(row.metrics.mean_episode_reward) << " violations " << row.metrics.violations
                << " d " << fmt(row.metrics.mean_d);
      if (row.eval) *opts.log << " eval " << fmt(row.eval->mean_reward) << " len " << fmt(row.eval->mean_length);
      *opts.log << " (" << std::fixed << std::setprecision(1) << row.wall_time << "s)"
                << std::defaultfloat << std::endl;
    }
    res.rows.push_back(row);
  }
  if (!opts.run_dir.empty()) res.policy.save_file((fs::path(opts.run_dir) / "final.sgpg").string());
  return res;
}

std::size_t MetricsTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::invalid_argument(source + ": no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

MetricsTable parse_metrics_csv(const std::string& text, const std::string& source) {
  MetricsTable t;
  t.source = source;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(in, line) || line.empty()) throw std::invalid_argument(source + ": empty metrics file");
  t.columns = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.columns.size())
      throw std::invalid_argument(source + ": line " + std::to_string(lineno) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(t.columns.size()));
    std::vector<double> row;
    for (const std::string& c : cells) {
      if (c == "nan" || c.empty()) {
        row.push_back(NAN);
        continue;
      }
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw std::invalid_argument(source + ": line " + std::to_string(lineno) + ": bad number '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

MetricsTable read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_metrics_csv(os.str(), path);
}

std::vector<MetricsTable> top_k_runs(const std::vector<MetricsTable>& runs,
                                     const std::string& rank_column, std::size_t top_k) {
  std::vector<std::pair<double, std::size_t>> score;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::size_t c = runs[i].column(rank_column);
    std::vector<double> xs;
    for (const auto& r : runs[i].rows) xs.push_back(r[c]);
    const double m = mean_finite(xs);
    score.emplace_back(std::isnan(m) ? -INFINITY : m, i);
  }
  std::stable_sort(score.begin(), score.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  const std::size_t k = top_k == 0 ? runs.size() : std::min(top_k, runs.size());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < k; ++i) keep.push_back(score[i].second);
  std::sort(keep.begin(), keep.end());
  std::vector<MetricsTable> out;
  for (std::size_t i : keep) out.push_back(runs[i]);
  return out;
}

std::vector<CurvePoint> summarize_column(const std::vector<MetricsTable>& runs,
                                         const std::string& column) {
  std::vector<CurvePoint> out;
  if (runs.empty()) return out;
  std::size_t len = runs.front().rows.size();
  for (const auto& r : runs) len = std::min(len, r.rows.size());
  for (std::size_t b = 0; b < len; ++b) {
    CurvePoint p;
    p.batch = b;
    std::vector<double> xs, steps;
    for (const auto& r : runs) {
      xs.push_back(r.rows[b][r.column(column)]);
      steps.push_back(r.rows[b][r.column("env_steps")]);
    }
    p.env_steps = mean_finite(steps);
    std::vector<double> finite;
    for (double x : xs)
      if (std::isfinite(x)) finite.push_back(x);
    p.runs = finite.size();
    p.mean = mean_finite(finite);
    double var = 0.0;
    for (double x : finite) var += (x - p.mean) * (x - p.mean);
    p.std = finite.size() > 1 ? std::sqrt(var / static_cast<double>(finite.size())) : 0.0;
    out.push_back(p);
  }
  return out;
}

}  // namespace sgpg
