#pragma once

// Episodic LTI environments. The state update is dynamics::step_mean; an
// EnvSpec only adds the reward, the termination rule and the reset sampler.

#include <random>
#include <string>

#include "sgpg/dynamics.hpp"
#include "sgpg/polytope.hpp"

namespace sgpg {

enum class Termination { none, bounds, ground, tilt, horizon };
const char* to_string(Termination t);

enum class RewardKind {
  velocity_squared,  // xdot^2 of the pre-step state (state index 1)
  quadrotor,         // hover reward / crash penalties on the post-step state
};

enum class TerminationKind {
  leave_bounds,  // post-step state outside `bounds`
  quadrotor,     // y < 0 (ground) or |phi| > tilt_limit (tilt)
};

struct EnvSpec {
  std::string name;
  LinearSystem sys;
  RewardKind reward = RewardKind::velocity_squared;
  TerminationKind termination = TerminationKind::leave_bounds;
  Polytope bounds{};  // true (unshrunk) safe region, for leave_bounds
  double tilt_limit = 0.5;
  Vector action_lo{}, action_hi{};
  Vector init_lo{}, init_hi{};  // uniform reset box
  std::size_t max_episode_len = 250;

  Polytope action_box() const { return Polytope::box(action_lo, action_hi); }
};

// Checks dimensions and bounds; throws std::invalid_argument.
void validate(const EnvSpec& spec);

// A = [[1, 0.02], [0, 1]], B = [0, 1]^T, |x| <= 1, a in [-1, 1].
EnvSpec double_integrator_env();
// Linearized hover model, f and tau in [-2, 2], 250-step episodes.
EnvSpec quadrotor_env();
EnvSpec env_by_name(const std::string& name);

struct StepResult {
  Vector state;
  double reward = 0.0;
  bool terminated = false;
  Termination cause = Termination::none;
};

Vector reset(const EnvSpec& spec, std::mt19937_64& rng);
// One transition; horizon truncation is the caller's (see Episode).
StepResult step(const EnvSpec& spec, std::span<const double> state, std::span<const double> action);

Vector clip_action(const EnvSpec& spec, std::span<const double> action);

// Tracks the step count so the horizon cut shows up as a termination cause.
class Episode {
 public:
  Episode(const EnvSpec& spec, std::mt19937_64& rng);
  Episode(const EnvSpec& spec, Vector initial_state);

  const Vector& state() const { return state_; }
  std::size_t steps() const { return t_; }
  bool done() const { return done_; }
  Termination cause() const { return cause_; }

  StepResult step(std::span<const double> action);

 private:
  const EnvSpec* spec_;
  Vector state_;
  std::size_t t_ = 0;
  bool done_ = false;
  Termination cause_ = Termination::none;
};

// Safety-guide sets for the built-in environments:
//   double integrator: S = shrink(|x| <= 1, delta), S_T = shrink(invariant set, delta);
//   quadrotor: the hand-built parallelograms in the (y, ydot) and (phi, phidot) planes
//   with tilt bound (1 - delta) * 0.5 and ground clearance 0.05.
struct SafeSets {
  Polytope safe;
  Polytope terminal;
};
SafeSets default_safe_sets(const EnvSpec& spec, double delta);

}  // namespace sgpg
