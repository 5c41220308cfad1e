#include "sgpg/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sgpg {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::none:
      return "none";
    case Termination::bounds:
      return "bounds";
    case Termination::ground:
      return "ground";
    case Termination::tilt:
      return "tilt";
    case Termination::horizon:
      return "horizon";
  }
  return "unknown";
}

void validate(const EnvSpec& spec) {
  const std::size_t n = spec.sys.state_dim(), m = spec.sys.action_dim();
  if (spec.action_lo.size() != m || spec.action_hi.size() != m)
    throw std::invalid_argument("env " + spec.name + ": action bounds must have dimension " +
                                std::to_string(m));
  for (std::size_t i = 0; i < m; ++i)
    if (!(spec.action_lo[i] < spec.action_hi[i]))
      throw std::invalid_argument("env " + spec.name + ": empty action interval");
  if (spec.init_lo.size() != n || spec.init_hi.size() != n)
    throw std::invalid_argument("env " + spec.name + ": init box must have dimension " +
                                std::to_string(n));
  for (std::size_t i = 0; i < n; ++i)
    if (spec.init_lo[i] > spec.init_hi[i])
      throw std::invalid_argument("env " + spec.name + ": inverted init box");
  if (spec.termination == TerminationKind::leave_bounds && spec.bounds.dim() != n)
    throw std::invalid_argument("env " + spec.name + ": bounds polytope dimension");
  if (spec.termination == TerminationKind::quadrotor && n != 6)
    throw std::invalid_argument("env " + spec.name + ": quadrotor termination needs 6 states");
  if (spec.reward == RewardKind::velocity_squared && n < 2)
    throw std::invalid_argument("env " + spec.name + ": velocity reward needs 2 states");
  if (spec.reward == RewardKind::quadrotor && n != 6)
    throw std::invalid_argument("env " + spec.name + ": quadrotor reward needs 6 states");
  if (spec.max_episode_len == 0)
    throw std::invalid_argument("env " + spec.name + ": max_episode_len must be >= 1");
}

EnvSpec double_integrator_env() {
  EnvSpec e{.name = "double_integrator", .sys = double_integrator_system(0.02)};
  e.reward = RewardKind::velocity_squared;
  e.termination = TerminationKind::leave_bounds;
  e.bounds = Polytope(Matrix{{1.0, 0.0}, {-1.0, 0.0}}, {1.0, 1.0});
  e.action_lo = {-1.0};
  e.action_hi = {1.0};
  e.init_lo = {-0.5, 0.0};
  e.init_hi = {0.5, 0.0};
  e.max_episode_len = 250;
  return e;
}

EnvSpec quadrotor_env() {
  EnvSpec e{.name = "planar_quadrotor", .sys = planar_quadrotor_system(0.02, 1.0, 1.0, 1.0)};
  e.reward = RewardKind::quadrotor;
  e.termination = TerminationKind::quadrotor;
  e.tilt_limit = 0.5;
  e.bounds = Polytope(Matrix{{0, 0, -1, 0, 0, 0}, {0, 0, 0, 0, 1, 0}, {0, 0, 0, 0, -1, 0}},
                      {0.0, 0.5, 0.5});
  e.action_lo = {-2.0, -2.0};
  e.action_hi = {2.0, 2.0};
  e.init_lo = {0.0, 0.0, 0.5, 0.0, 0.0, 0.0};
  e.init_hi = {0.0, 0.0, 1.5, 0.0, 0.0, 0.0};
  e.max_episode_len = 250;
  return e;
}

EnvSpec env_by_name(const std::string& name) {
  if (name == "double_integrator") return double_integrator_env();
  if (name == "planar_quadrotor" || name == "quadrotor") return quadrotor_env();
  throw std::invalid_argument("unknown environment '" + name + "'");
}

Vector reset(const EnvSpec& spec, std::mt19937_64& rng) {
  Vector s(spec.init_lo.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (spec.init_lo[i] == spec.init_hi[i]) {
      s[i] = spec.init_lo[i];
    } else {
      s[i] = std::uniform_real_distribution<double>(spec.init_lo[i], spec.init_hi[i])(rng);
    }
  }
  return s;
}

StepResult step(const EnvSpec& spec, std::span<const double> state, std::span<const double> action) {
  StepResult r;
  r.state = step_mean(spec.sys, state, action);
  if (!all_finite(r.state)) throw std::domain_error("env " + spec.name + ": non-finite state");
  const Vector& s = r.state;

  switch (spec.termination) {
    case TerminationKind::leave_bounds:
      if (!contains(spec.bounds, s, 0.0)) r.cause = Termination::bounds;
      break;
    case TerminationKind::quadrotor:
      if (s[2] < 0.0) {
        r.cause = Termination::ground;
      } else if (std::abs(s[4]) > spec.tilt_limit) {
        r.cause = Termination::tilt;
      }
      break;
  }
  r.terminated = r.cause != Termination::none;

  switch (spec.reward) {
    case RewardKind::velocity_squared:
      r.reward = state[1] * state[1];
      break;
    case RewardKind::quadrotor:
      if (r.cause == Termination::ground) {
        r.reward = -1.0 - 2.0 * std::abs(s[3]);
      } else if (r.cause == Termination::tilt) {
        r.reward = -1.0 - 5.0 * std::abs(s[5]);
      } else {
        r.reward = -0.01 * s[2] - 0.01 * std::abs(s[0]);
      }
      break;
  }
  return r;
}

Vector clip_action(const EnvSpec& spec, std::span<const double> action) {
  if (action.size() != spec.action_lo.size()) throw DimensionError("clip_action: dimension");
  Vector a(action.begin(), action.end());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], spec.action_lo[i], spec.action_hi[i]);
  return a;
}

Episode::Episode(const EnvSpec& spec, std::mt19937_64& rng) : spec_(&spec), state_(reset(spec, rng)) {}

Episode::Episode(const EnvSpec& spec, Vector initial_state)
    : spec_(&spec), state_(std::move(initial_state)) {
  if (state_.size() != spec.sys.state_dim()) throw DimensionError("Episode: initial state dimension");
}

StepResult Episode::step(std::span<const double> action) {
  if (done_) throw std::logic_error("Episode::step after termination");
  StepResult r = sgpg::step(*spec_, state_, action);
  ++t_;
  if (!r.terminated && t_ >= spec_->max_episode_len) {
    r.terminated = true;
    r.cause = Termination::horizon;
  }
  done_ = r.terminated;
  cause_ = r.cause;
  state_ = r.state;
  return r;
}

SafeSets default_safe_sets(const EnvSpec& spec, double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("default_safe_sets: delta must lie in [0, 1)");
  if (spec.name == "double_integrator") {
    const Polytope s = normalize(spec.bounds);
    const Polytope omega = compute_invariant_set(spec.sys, s, spec.action_box());
    // Scaling an invariant polytope about the origin keeps it invariant
    // whenever the action box contains the origin.
    return {shrink(s, delta), shrink(normalize(omega), delta)};
  }
  if (spec.name == "planar_quadrotor") {
    const double phi_max = (1.0 - delta) * spec.tilt_limit;
    const double y_lo = 0.05, y_hi = 3.0;
    const double dt = spec.sys.dt();
    // Largest braking acceleration over one step, from the action box.
    const double thrust_acc = spec.sys.B()(3, 0) / dt * std::min(-spec.action_lo[0], spec.action_hi[0]);
    const double torque_acc = spec.sys.B()(5, 1) / dt * std::min(-spec.action_lo[1], spec.action_hi[1]);
    // A parallelogram of width w and velocity height c is one-step invariant
    // when c^2 <= w * acc; keep a margin below that limit.
    const double w_phi = 2.0 * phi_max, w_y = y_hi - y_lo;
    const double c_phi = 0.85 * std::sqrt(w_phi * torque_acc);
    const double c_y = 0.85 * std::sqrt(w_y * thrust_acc);

    Polytope safe(Matrix{{0, 0, -1, 0, 0, 0}, {0, 0, 0, 0, 1, 0}, {0, 0, 0, 0, -1, 0}},
                  {-y_lo, phi_max, phi_max});
    const double kp = c_phi / w_phi, ky = c_y / w_y;
    Polytope terminal(Matrix{{0, 0, -1, 0, 0, 0},
                             {0, 0, 1, 0, 0, 0},
                             {0, 0, ky, 1, 0, 0},
                             {0, 0, -ky, -1, 0, 0},
                             {0, 0, 0, 0, 1, 0},
                             {0, 0, 0, 0, -1, 0},
                             {0, 0, 0, 0, kp, 1},
                             {0, 0, 0, 0, -kp, -1}},
                      {-y_lo, y_hi, ky * y_hi, -ky * y_lo, phi_max, phi_max, kp * phi_max,
                       kp * phi_max});
    return {normalize(safe), normalize(terminal)};
  }
  throw std::invalid_argument("default_safe_sets: no built-in sets for env '" + spec.name + "'");
}

}  // namespace sgpg
