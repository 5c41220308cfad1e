#include "sgpg/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace sgpg {

namespace {

// dd/dmean and dd/dlog_std of d(safe, base) with respect to the base parameters.
void penalty_partials(const GaussDist& base, const GaussDist& safe, std::span<double> d_mean,
                      std::span<double> d_log_std) {
  for (std::size_t i = 0; i < base.dim(); ++i) {
    const double var = base.std[i] * base.std[i];
    const double gap = safe.std[i] * safe.std[i] - var;
    d_mean[i] = -2.0 * (safe.mean[i] - base.mean[i]);
    d_log_std[i] = -4.0 * var * gap;
  }
}

std::size_t episode_limit(const EnvSpec& env, std::size_t override_len) {
  return override_len > 0 ? override_len : env.max_episode_len;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("train.gamma must lie in [0, 1)");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("train.beta must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train.lr must be positive");
  if (batch_steps == 0) throw std::invalid_argument("train.batch_steps must be >= 1");
  if (n_batches == 0) throw std::invalid_argument("train.n_batches must be >= 1");
}

double Trajectory::total_reward() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

std::vector<double> returns_to_go(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::domain_error("returns_to_go: gamma must lie in [0, 1)");
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

double safety_penalty(const GaussDist& base, const GaussDist& safe) {
  if (base.dim() != safe.dim() || base.std.size() != safe.std.size())
    throw DimensionError("safety_penalty: dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < base.dim(); ++i) {
    const double dm = safe.mean[i] - base.mean[i];
    const double dv = safe.std[i] * safe.std[i] - base.std[i] * base.std[i];
    d += dm * dm + dv * dv;
  }
  return d;
}

bool is_violation(Termination t) {
  return t == Termination::bounds || t == Termination::ground || t == Termination::tilt;
}

Batch collect_batch(const MlpPolicy& policy, const SafetyGuide* guide, const EnvSpec& env,
                    const TrainConfig& cfg, std::mt19937_64& rng) {
  const std::size_t limit = episode_limit(env, cfg.max_episode_len);
  const std::size_t m = env.sys.action_dim();
  std::normal_distribution<double> normal(0.0, 1.0);
  Batch batch;
  BatchMetrics& mt = batch.metrics;
  double kl_sum = 0.0, d_sum = 0.0, reward_sum = 0.0;

  while (mt.steps < cfg.batch_steps) {
    Trajectory tr;
    Episode ep(env, rng);
    while (!ep.done()) {
      const Vector s = ep.state();
      GaussDist base = policy.forward(s);
      GaussDist safe = base;
      GuideStatus status = GuideStatus::optimal;
      double kl = 0.0;
      if (guide) {
        GuideResult g;
        try {
          g = guide->solve(s, base);
        } catch (const std::exception& e) {
          std::ostringstream os;
          os << "guide solve failed at episode " << mt.episodes << " step " << ep.steps() << ": "
             << e.what();
          throw TrainError(os.str());
        }
        safe = g.safe;
        status = g.status;
        kl = g.kl;
        if (!g.identity) ++mt.guide_interventions;
        if (status == GuideStatus::relaxed) ++mt.slack_events;
        if (status == GuideStatus::failed) ++mt.guide_failures;
      }
      Vector a(m);
      for (std::size_t i = 0; i < m; ++i) a[i] = safe.mean[i] + safe.std[i] * normal(rng);
      Vector exec = clip_action(env, a);
      const StepResult r = ep.step(exec);

      kl_sum += kl;
      d_sum += safety_penalty(base, safe);
      tr.states.push_back(s);
      tr.actions.push_back(std::move(a));
      tr.executed.push_back(std::move(exec));
      tr.rewards.push_back(r.reward);
      tr.base.push_back(std::move(base));
      tr.safe.push_back(std::move(safe));
      tr.status.push_back(status);
      tr.kl.push_back(kl);
      if (!ep.done() && ep.steps() >= limit) break;
    }
    tr.cause = ep.done() ? ep.cause() : Termination::horizon;
    if (is_violation(tr.cause)) ++mt.violations;
    mt.steps += tr.size();
    ++mt.episodes;
    reward_sum += tr.total_reward();
    batch.trajectories.push_back(std::move(tr));
  }
  mt.mean_episode_reward = reward_sum / static_cast<double>(mt.episodes);
  mt.mean_episode_length = static_cast<double>(mt.steps) / static_cast<double>(mt.episodes);
  mt.mean_kl = kl_sum / static_cast<double>(mt.steps);
  mt.mean_d = d_sum / static_cast<double>(mt.steps);
  return batch;
}

Vector surrogate_gradient(const MlpPolicy& policy, const Batch& batch, const TrainConfig& cfg,
                          double* value) {
  if (batch.trajectories.empty()) throw TrainError("update: empty batch");
  const std::size_t m = policy.arch().output;
  const double inv_n = 1.0 / static_cast<double>(batch.trajectories.size());
  Vector grad(policy.num_params(), 0.0);
  Vector dm(m), dl(m), pm(m), pl(m);
  double total = 0.0;
  for (const Trajectory& tr : batch.trajectories) {
    const std::vector<double> g = returns_to_go(tr.rewards, cfg.gamma);
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const ForwardCache c = policy.forward_cached(tr.states[t]);
      gauss_log_prob_partials(c.dist, tr.actions[t], dm, dl);
      penalty_partials(c.dist, tr.safe[t], pm, pl);
      for (std::size_t i = 0; i < m; ++i) {
        dm[i] = g[t] * dm[i] - cfg.beta * pm[i];
        dl[i] = g[t] * dl[i] - cfg.beta * pl[i];
      }
      policy.backward(c, dm, dl, inv_n, grad);
      if (value)
        total += g[t] * gauss_log_prob(c.dist, tr.actions[t]) -
                 cfg.beta * safety_penalty(c.dist, tr.safe[t]);
    }
  }
  if (value) *value = total * inv_n;
  return grad;
}

double surrogate_objective(const MlpPolicy& policy, const Batch& batch, const TrainConfig& cfg) {
  if (batch.trajectories.empty()) throw TrainError("surrogate: empty batch");
  double total = 0.0;
  for (const Trajectory& tr : batch.trajectories) {
    const std::vector<double> g = returns_to_go(tr.rewards, cfg.gamma);
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const GaussDist d = policy.forward(tr.states[t]);
      total += g[t] * gauss_log_prob(d, tr.actions[t]) - cfg.beta * safety_penalty(d, tr.safe[t]);
    }
  }
  return total / static_cast<double>(batch.trajectories.size());
}

Optimizer::Optimizer(OptimizerKind kind, double lr, std::size_t num_params)
    : kind_(kind), lr_(lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("Optimizer: lr must be positive");
  if (kind_ == OptimizerKind::adam) {
    m_.assign(num_params, 0.0);
    v_.assign(num_params, 0.0);
  }
}

void Optimizer::step(Vector& theta, std::span<const double> grad) {
  if (grad.size() != theta.size()) throw DimensionError("Optimizer::step: gradient size");
  ++t_;
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += lr_ * grad[i];
    return;
  }
  if (m_.size() != theta.size()) throw DimensionError("Optimizer::step: parameter count changed");
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    theta[i] += lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
  }
}

UpdateStats update(MlpPolicy& policy, const Batch& batch, const TrainConfig& cfg, Optimizer& opt) {
  UpdateStats st;
  const Vector grad = surrogate_gradient(policy, batch, cfg, &st.surrogate);
  if (!all_finite(grad)) {
    std::ostringstream os;
    os << "update: non-finite gradient (surrogate " << st.surrogate << ", "
       << batch.metrics.steps << " steps, " << batch.trajectories.size() << " episodes)";
    throw TrainError(os.str());
  }
  st.grad_norm = norm2(grad);
  st.mean_d = batch.metrics.mean_d;
  Vector theta = policy.parameters();
  opt.step(theta, grad);
  policy.set_parameters(theta);
  return st;
}

EvalMetrics evaluate(const MlpPolicy& policy, const SafetyGuide* guide, const EnvSpec& env,
                     std::size_t episodes, std::uint64_t seed, std::size_t max_episode_len) {
  if (episodes == 0) throw std::invalid_argument("evaluate: need at least one episode");
  const std::size_t limit = episode_limit(env, max_episode_len);
  std::mt19937_64 rng(seed);
  EvalMetrics em;
  std::size_t violations = 0, steps = 0;
  double reward = 0.0, d_sum = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    Episode ep(env, rng);
    while (!ep.done()) {
      const GaussDist base = policy.forward(ep.state());
      Vector act = base.mean;
      if (guide) {
        const GuideResult g = guide->solve(ep.state(), base);
        d_sum += safety_penalty(base, g.safe);
        act = g.safe.mean;
      }
      reward += ep.step(clip_action(env, act)).reward;
      ++steps;
      if (!ep.done() && ep.steps() >= limit) break;
    }
    if (ep.done() && is_violation(ep.cause())) ++violations;
  }
  em.episodes = episodes;
  em.mean_reward = reward / static_cast<double>(episodes);
  em.mean_length = static_cast<double>(steps) / static_cast<double>(episodes);
  em.violation_rate = static_cast<double>(violations) / static_cast<double>(episodes);
  em.mean_d = guide ? d_sum / static_cast<double>(steps) : 0.0;
  return em;
}

}  // namespace sgpg
