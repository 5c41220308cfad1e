#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sgpg/experiment.hpp"

namespace fs = std::filesystem;
using namespace sgpg;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("sgpg_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
};

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SGPG_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

const char* kSmall = R"([experiment]
name = "small"
seed = 2
checkpoint_every = 0
[env]
name = "double_integrator"
[guide]
horizon = 30
eps = 0.001
[train]
batch_steps = 1000
n_batches = 2
[eval]
episodes = 2
every = 1
)";

}  // namespace

TEST_CASE("safesets subcommand") {
  Scratch s;
  const fs::path cfg = s.write("ok.toml", kSmall);
  CHECK(run("safesets " + cfg.string() + " -o " + (s.dir / "sets").string(), s.dir / "log") == 0);
  const std::string report = slurp(s.dir / "sets" / "report.txt");
  CHECK(report.find("terminal_invariant pass") != std::string::npos);
  CHECK(report.find("result pass") != std::string::npos);
  CHECK(fs::exists(s.dir / "sets" / "terminal_set.txt"));

  const fs::path bad = s.write("bad.toml", std::string(kSmall) +
                                               "[safesets]\nterminal = \"rows\"\n"
                                               "terminal_rows = [\"1 0 <= 1\", \"-1 0 <= 1\"]\n");
  CHECK(run("safesets " + bad.string(), s.dir / "log") == 1);
  CHECK(slurp(s.dir / "log").find("terminal_invariant fail") != std::string::npos);

  const fs::path malformed = s.write("mal.toml", std::string(kSmall) +
                                                     "[safesets]\nsafe_rows = [\"1 0 <= 1\", \"1 0 0 <= 1\"]\n");
  CHECK(run("safesets " + malformed.string(), s.dir / "log") == 2);
  CHECK(slurp(s.dir / "log").find("safesets.safe_rows") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
  Scratch s;
  CHECK(run("", s.dir / "log") == 2);
  CHECK(run("train", s.dir / "log") == 2);
  CHECK(run("train " + (s.dir / "missing.toml").string(), s.dir / "log") == 2);
  const fs::path cfg = s.write("c.toml", kSmall);
  CHECK(run("train " + cfg.string() + " --seeds 5..1 -o " + s.dir.string(), s.dir / "log") == 2);
}

TEST_CASE("train, eval and summarize") {
  Scratch s;
  const fs::path cfg = s.write("c.toml", kSmall);
  REQUIRE(run("train " + cfg.string() + " -q --seeds 1..2 -o " + s.dir.string(), s.dir / "log") == 0);
  for (int seed : {1, 2}) {
    const fs::path dir = s.dir / "small_guided" / ("seed_" + std::to_string(seed));
    const MetricsTable t = read_metrics_csv((dir / "metrics.csv").string());
    REQUIRE(t.rows.size() == 2);
    for (const auto& r : t.rows) CHECK(r[t.column("violations")] == 0);
    CHECK(fs::exists(dir / "final.sgpg"));
    CHECK(fs::exists(dir / "config.toml"));
  }

  // The vanilla baseline leaves the safe set early with a fresh policy.
  REQUIRE(run("train " + cfg.string() + " -q --no-guide -o " + s.dir.string(), s.dir / "log") == 0);
  const MetricsTable v = read_metrics_csv((s.dir / "small_vanilla" / "seed_2" / "metrics.csv").string());
  CHECK(v.rows[0][v.column("violations")] > 0);

  const fs::path ckpt = s.dir / "small_guided" / "seed_1" / "final.sgpg";
  const fs::path out = s.dir / "eval.csv";
  REQUIRE(run("eval " + ckpt.string() + " --config " + cfg.string() + " --with-guide -n 3 -o " + out.string(),
              s.dir / "log") == 0);
  const std::string text = slurp(out);
  CHECK(text.rfind("checkpoint,env,guide,episodes,mean_reward,mean_length,violation_rate,mean_d\n", 0) == 0);
  CHECK(text.find(",double_integrator,on,3,") != std::string::npos);

  CHECK(run("eval " + ckpt.string() + " --env planar_quadrotor", s.dir / "log") == 2);

  const fs::path curve = s.dir / "curve.csv";
  REQUIRE(run("summarize " + (s.dir / "small_guided").string() + " --column mean_episode_reward -o " +
                  curve.string(),
              s.dir / "log") == 0);
  const std::string c = slurp(curve);
  CHECK(c.rfind("batch,env_steps,mean,std,runs\n", 0) == 0);
  CHECK(c.find(",2\n") != std::string::npos);
}

TEST_CASE("a random policy behind the guide does not crash") {
  Scratch s;
  std::mt19937_64 rng(11);
  // Wide exploration noise makes the bare policy leave the set quickly.
  const MlpPolicy p = MlpPolicy::initialized(PolicyArch{2, 1}, rng, 1.0, 1.0);
  p.save_file((s.dir / "rand.sgpg").string());
  const fs::path out = s.dir / "e.csv";
  REQUIRE(run("eval " + (s.dir / "rand.sgpg").string() + " --env double_integrator --with-guide -n 5 -o " +
                  out.string(),
              s.dir / "log") == 0);
  const std::string text = slurp(out);
  const std::string row = text.substr(text.find('\n') + 1);
  std::vector<std::string> f;
  std::stringstream ss(row);
  for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
  REQUIRE(f.size() == 8);
  CHECK(std::stod(f[6]) == 0.0);
  CHECK(std::stod(f[5]) == 250.0);
}
