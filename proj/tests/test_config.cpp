#include <doctest.h>

#include <cmath>
#include <string>

#include "sgpg/experiment.hpp"

using namespace sgpg;

namespace {

std::string error_of(const std::string& text) {
  try {
    experiment_from_config(Config::parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string parse_error(const std::string& text) {
  try {
    Config::parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parser values") {
  const Config c = Config::parse(R"(# header
top = 3

[a]
x = 1_000.5   # trailing
flag = true
s = "tab\there"
v = [1, -2.5,
     3e2]  # spans lines
m = [[1, 2], [3, 4]]
names = ["p", "q"]
big = inf

[a.b]
y = -inf
)");
  CHECK(c.integer("top") == 3);
  CHECK(c.number("a.x") == 1000.5);
  CHECK(c.boolean("a.flag", false));
  CHECK(c.string("a.s") == "tab\there");
  CHECK(c.vector("a.v") == Vector{1, -2.5, 300});
  const Matrix m = c.matrix("a.m");
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == 3);
  CHECK(c.strings("a.names") == std::vector<std::string>{"p", "q"});
  CHECK(std::isinf(c.number("a.big")));
  CHECK(c.number("a.b.y") < 0);
  CHECK(c.at("a.flag").line == 6);
  CHECK(c.number("a.missing", 7.0) == 7.0);
  CHECK_THROWS_AS(c.number("a.missing"), ConfigError);
}

TEST_CASE("parser errors carry line numbers") {
  CHECK(parse_error("a = 1\nb = \n") == "line 2: expected a value");
  CHECK(parse_error("x = 1\nx = 2\n") == "line 2: x: duplicate key");
  CHECK(parse_error("[s]\nv = [1, 2\n") .find("unterminated array") != std::string::npos);
  CHECK(parse_error("s = \"abc\n").find("line 1: unterminated string") == 0);
  CHECK(parse_error("n = 1__0\n").find("misplaced '_'") != std::string::npos);
  CHECK(parse_error("n = 12abc\n") == "line 1: invalid value '12abc'");
  CHECK(parse_error("n = 1 2\n").find("trailing") != std::string::npos);
}

TEST_CASE("typed accessors reject wrong types") {
  const Config c = Config::parse("a = \"x\"\nb = 1.5\nc = [[1], [2, 3]]\n");
  CHECK_THROWS_AS(c.number("a"), ConfigError);
  CHECK_THROWS_AS(c.integer("b"), ConfigError);
  CHECK_THROWS_AS(c.boolean("b", true), ConfigError);
  try {
    c.matrix("c");
    FAIL("ragged matrix accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("ragged") != std::string::npos);
    CHECK(e.line() == 3);
  }
}

TEST_CASE("experiment config defaults and overrides") {
  const ExperimentConfig x = experiment_from_config(Config::parse(R"(
[experiment]
name = "t"
seed = 9
[env]
name = "planar_quadrotor"
[guide]
horizon = 15
eps = 0.01
[train]
optimizer = "sgd"
lr = 0.01
)"));
  CHECK(x.name == "t");
  CHECK(x.train.seed == 9);
  CHECK(x.env.sys.state_dim() == 6);
  CHECK(x.guide.horizon == 15);
  CHECK(x.train.optimizer == OptimizerKind::sgd);
  CHECK(x.sets.terminal == "default");
}

TEST_CASE("experiment config errors") {
  CHECK(error_of("[env]\nname = \"double_integrator\"\n[train]\nlearning_rate = 1\n") ==
        "line 4: train.learning_rate: unknown key");
  CHECK(error_of("[env]\nname = \"moon\"\n").find("line 2: env.name") == 0);
  CHECK(error_of("[env]\nname = \"double_integrator\"\n[guide]\neps = 1.5\n") ==
        "line 4: guide.eps: must lie in (0, 1)");
  CHECK(error_of("[env]\nname = \"double_integrator\"\n[train]\noptimizer = \"rmsprop\"\n")
            .find("line 4") == 0);
  CHECK(error_of("[env]\nname = \"double_integrator\"\n[safesets]\nterminal = \"rows\"\n")
            .find("terminal_rows") != std::string::npos);
  CHECK(error_of("[env]\nname = \"double_integrator\"\n[safesets]\nsafe_rows = [\"1 0 <= 1\",\n  \"1 x <= 2\"]\n")
            .find("line 4: safesets.safe_rows") == 0);
  CHECK(error_of("[env]\nname = \"double_integrator\"\n[train]\nbatch_steps = 0\n").find("line 4") == 0);
}

TEST_CASE("safe sets from config") {
  ExperimentConfig x = experiment_from_config(Config::parse("[env]\nname = \"double_integrator\"\n"));
  const SafeSetReport d = resolve_safe_sets(x);
  CHECK(d.ok());
  x.sets.terminal = "computed";
  CHECK(resolve_safe_sets(x).ok());
  // A terminal set equal to S is not invariant for the double integrator.
  x.sets.terminal = "rows";
  x.sets.terminal_rows = {"1 0 <= 1", "-1 0 <= 1"};
  const SafeSetReport bad = resolve_safe_sets(x);
  CHECK_FALSE(bad.terminal_invariant);
  CHECK_FALSE(bad.ok());
}

TEST_CASE("metrics csv round trip") {
  BatchRow r;
  r.batch = 3;
  r.env_steps = 15000;
  r.metrics.mean_episode_reward = 12.5;
  r.metrics.violations = 2;
  r.update.grad_norm = 0.25;
  r.wall_time = 1.0;
  const std::string text = std::string(kMetricsHeader) + "\n" + metrics_csv_row(r) + "\n";
  const MetricsTable t = parse_metrics_csv(text, "mem");
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][t.column("batch")] == 3);
  CHECK(t.rows[0][t.column("mean_episode_reward")] == 12.5);
  CHECK(t.rows[0][t.column("violations")] == 2);
  CHECK(std::isnan(t.rows[0][t.column("eval_reward")]));
  CHECK_THROWS(t.column("nope"));
  CHECK_THROWS(parse_metrics_csv("a,b\n1\n"));
}

TEST_CASE("top-k selection and curve summaries") {
  auto table = [](const std::string& name, std::vector<double> score) {
    MetricsTable t;
    t.source = name;
    t.columns = {"batch", "env_steps", "eval_reward"};
    for (std::size_t i = 0; i < score.size(); ++i)
      t.rows.push_back({static_cast<double>(i), 100.0 * static_cast<double>(i + 1), score[i]});
    return t;
  };
  const std::vector<MetricsTable> runs{table("a", {1, 3}), table("b", {5, NAN}), table("c", {2, 2}),
                                       table("d", {4, 4})};
  const auto best = top_k_runs(runs, "eval_reward", 2);
  REQUIRE(best.size() == 2);
  CHECK(best[0].source == "b");
  CHECK(best[1].source == "d");
  CHECK(top_k_runs(runs, "eval_reward", 0).size() == 4);

  const auto curve = summarize_column({runs[0], runs[2]}, "eval_reward");
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].mean == 1.5);
  CHECK(curve[0].std == 0.5);
  CHECK(curve[1].mean == 2.5);
  CHECK(curve[1].env_steps == 200);
  CHECK(curve[1].runs == 2);
  // Missing values are skipped rather than averaged in.
  const auto partial = summarize_column({runs[1], runs[3]}, "eval_reward");
  CHECK(partial[1].runs == 1);
  CHECK(partial[1].mean == 4);
}
