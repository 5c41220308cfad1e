#pragma once

// Episodic REINFORCE with discounted returns-to-go plus the safety penalty
//
//   J^p = E[ r(s, a) - beta * d(pi_safe(.|s), pi_theta(.|s)) ],
//   d   = ||mu_safe - mu||^2 + ||sigma_safe^2 - sigma^2||^2,
//
// where actions are sampled from the guide's output and the guide output is
// a constant as far as the gradient is concerned.

#include <optional>
#include <random>
#include <vector>

#include "sgpg/envs.hpp"
#include "sgpg/guide.hpp"
#include "sgpg/policy.hpp"

namespace sgpg {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double gamma = 0.97;
  double beta = 1.5;
  double lr = 0.001;
  std::size_t batch_steps = 5000;
  std::size_t max_episode_len = 0;  // 0: the environment's own limit
  std::size_t n_batches = 40;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> actions;   // sampled from the safe distribution, before clipping
  std::vector<Vector> executed;  // clipped to the action box
  std::vector<double> rewards;
  std::vector<GaussDist> base;
  std::vector<GaussDist> safe;
  std::vector<GuideStatus> status;  // optimal for every step when no guide runs
  std::vector<double> kl;
  Termination cause = Termination::none;

  std::size_t size() const { return rewards.size(); }
  double total_reward() const;
};

struct BatchMetrics {
  std::size_t steps = 0;
  std::size_t episodes = 0;
  double mean_episode_reward = 0.0;
  double mean_episode_length = 0.0;
  std::size_t violations = 0;  // safety terminations (bounds, ground, tilt)
  double mean_kl = 0.0;
  double mean_d = 0.0;
  std::size_t slack_events = 0;  // relaxed guide solves
  std::size_t guide_failures = 0;
  std::size_t guide_interventions = 0;  // solves that changed the distribution
};

struct Batch {
  std::vector<Trajectory> trajectories;
  BatchMetrics metrics;
};

struct UpdateStats {
  double grad_norm = 0.0;
  double surrogate = 0.0;
  double mean_d = 0.0;
};

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// G_t = r_t + gamma G_{t+1}.
std::vector<double> returns_to_go(std::span<const double> rewards, double gamma);

double safety_penalty(const GaussDist& base, const GaussDist& safe);

bool is_violation(Termination t);

// Rolls whole episodes until at least cfg.batch_steps steps are collected.
// With guide == nullptr the base distribution is sampled directly.
Batch collect_batch(const MlpPolicy& policy, const SafetyGuide* guide, const EnvSpec& env,
                    const TrainConfig& cfg, std::mt19937_64& rng);

// (1/N) sum_j sum_t [ log pi(a_t|s_t) G_t - beta d(safe_t, pi(s_t)) ] with the
// returns and safe distributions frozen; its gradient is the update direction.
double surrogate_objective(const MlpPolicy& policy, const Batch& batch, const TrainConfig& cfg);
Vector surrogate_gradient(const MlpPolicy& policy, const Batch& batch, const TrainConfig& cfg,
                          double* value = nullptr);

// Ascent on theta along a gradient: plain steps (sgd) or Adam with the
// usual moment decay rates 0.9 / 0.999.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, std::size_t num_params);

  void step(Vector& theta, std::span<const double> grad);
  std::size_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  Vector m_, v_;
  std::size_t t_ = 0;
};

// One ascent step along surrogate_gradient.
UpdateStats update(MlpPolicy& policy, const Batch& batch, const TrainConfig& cfg, Optimizer& opt);

struct EvalMetrics {
  std::size_t episodes = 0;
  double mean_reward = 0.0;
  double mean_length = 0.0;
  double violation_rate = 0.0;  // fraction of episodes ending in a safety termination
  double mean_d = 0.0;          // only meaningful with a guide
};

// Deterministic evaluation: the executed action is the mean of the base
// distribution, or of the guide's output when a guide is given.
EvalMetrics evaluate(const MlpPolicy& policy, const SafetyGuide* guide, const EnvSpec& env,
                     std::size_t episodes, std::uint64_t seed, std::size_t max_episode_len = 0);

}  // namespace sgpg
