#pragma once

// The safety guide: the KL-closest Gaussian to the base policy's action
// distribution whose open-loop plan keeps the state inside S with probability
// 1 - eps per step and ends in the invariant terminal set S_T.
//
// Decision vector layout (m = action dim, H = horizon):
//   z = [sigma_0 (m) | a_0 (m) | a_1 (m) | ... | a_{H-1} (m)]
// The state at plan step t depends only on the prefix [0, m (t + 1)).

#include <optional>
#include <vector>

#include "sgpg/barrier.hpp"
#include "sgpg/chance.hpp"
#include "sgpg/dynamics.hpp"
#include "sgpg/gauss.hpp"
#include "sgpg/polytope.hpp"

namespace sgpg {

struct GuideConfig {
  unsigned horizon = 30;
  double eps = 0.001;
  Polytope safe;      // S, already shrunk
  Polytope terminal;  // S_T, already shrunk
  Polytope action_box;
  double slack_weight = 1e3;
  double sigma_floor = 1e-4;
  double kkt_tol = 1e-8;
  int max_newton_iter = 300;
  double mu0 = 1.0;
  double mu_factor = 10.0;
};

enum class GuideStatus { optimal, relaxed, failed };
const char* to_string(GuideStatus s);

struct GuideResult {
  GaussDist safe;
  double kl = 0.0;
  std::vector<Vector> plan_actions;  // a_0 .. a_{H-1}
  std::vector<Vector> plan_states;   // mu_0 = s .. mu_H
  double slack_total = 0.0;
  GuideStatus status = GuideStatus::failed;
  int newton_iters = 0;
  bool identity = false;  // base distribution returned unchanged
};

class GuideError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SafetyGuide {
 public:
  // Validates the configuration (S_T subset of S, bounded action box, ...)
  // and precomputes everything that does not depend on the current state.
  SafetyGuide(LinearSystem sys, GuideConfig cfg);

  GuideResult solve(std::span<const double> state, const GaussDist& base) const;

  const LinearSystem& system() const { return sys_; }
  const GuideConfig& config() const { return cfg_; }
  std::size_t num_vars() const { return m_ * (cfg_.horizon + 1); }
  std::size_t num_state_cones() const { return state_cones_.size(); }

  // The full constraint set at `state` in dense form, state cones first.
  std::vector<SocConstraint> constraints(std::span<const double> state) const;
  // Max over constraints of (g^T z + c ||F z|| - h); <= 0 means feasible.
  double max_violation(std::span<const double> state, std::span<const double> z) const;

 private:
  struct StateCone {
    barrier::Cone cone;  // h holds the row offset v; the state term is added per solve
    Vector state_coef;   // u^T A^t
  };

  std::vector<barrier::Cone> instantiate(std::span<const double> state) const;
  Vector candidate(std::span<const double> state, std::span<const double> a0,
                   std::span<const double> sigma0, bool interior) const;
  bool identity_feasible(std::span<const double> state, const GaussDist& base,
                         const std::vector<barrier::Cone>& cones) const;
  GuideResult finish(std::span<const double> state, const GaussDist& base,
                     std::span<const double> z, GuideStatus status, int iters) const;
  GuideResult fallback(std::span<const double> state, const GaussDist& base, int iters) const;
  barrier::Options solver_options() const;

  LinearSystem sys_;
  GuideConfig cfg_;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<StateCone> state_cones_;
  std::vector<barrier::Cone> fixed_cones_;  // action box rows and the std floor
  std::size_t first_action_cones_ = 0;      // leading entries of fixed_cones_ on (sigma_0, a_0)
  Matrix lqr_;
  Vector center_;
  std::optional<std::pair<Vector, Vector>> box_;  // axis-aligned bounds when Abox is a box
};

GuideResult solve_guide(const GuideConfig& cfg, const LinearSystem& sys,
                        std::span<const double> state, const GaussDist& base);

}  // namespace sgpg
