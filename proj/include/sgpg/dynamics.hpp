#pragma once

#include <vector>

#include "sgpg/linalg.hpp"

namespace sgpg {

// Known discrete-time LTI model x' = A x + B a. dt is metadata only.
class LinearSystem {
 public:
  LinearSystem(Matrix a, Matrix b, double dt = 0.0);

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  double dt() const { return dt_; }
  std::size_t state_dim() const { return a_.rows(); }
  std::size_t action_dim() const { return b_.cols(); }

 private:
  Matrix a_;
  Matrix b_;
  double dt_;
};

LinearSystem double_integrator_system(double dt = 0.02);
// State order (x, xdot, y, ydot, phi, phidot), action (thrust, torque), both
// linearized about hover, so thrust is the deviation from m g.
LinearSystem planar_quadrotor_system(double dt = 0.02, double mass = 1.0,
                                     double inertia = 1.0, double gravity = 1.0);

Vector step_mean(const LinearSystem& sys, std::span<const double> x, std::span<const double> a);

// A^t B Sigma0_bar: the covariance factor carried by the state t+1 steps after
// a stochastic first action with factor Sigma0_bar (m x m).
Matrix propagate_cov_factor(const LinearSystem& sys, const Matrix& sigma0_bar, unsigned t);

// Infinite-horizon discrete LQR gain K (a = -K x) from value iteration on the
// Riccati recursion. Throws if it does not settle within max_iter sweeps.
Matrix lqr_gain(const LinearSystem& sys, const Matrix& q, const Matrix& r,
                unsigned max_iter = 100000, double tol = 1e-10);

// Cached powers A^0 .. A^max_power.
class PowerCache {
 public:
  PowerCache(const LinearSystem& sys, unsigned max_power);
  const Matrix& power(unsigned t) const { return powers_.at(t); }
  // A^t B
  const Matrix& input_response(unsigned t) const { return responses_.at(t); }
  unsigned max_power() const { return static_cast<unsigned>(powers_.size() - 1); }

 private:
  std::vector<Matrix> powers_;
  std::vector<Matrix> responses_;
};

}  // namespace sgpg
