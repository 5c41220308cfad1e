#include "sgpg/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sgpg {

LinearSystem::LinearSystem(Matrix a, Matrix b, double dt)
    : a_(std::move(a)), b_(std::move(b)), dt_(dt) {
  if (a_.rows() == 0 || a_.rows() != a_.cols())
    throw DimensionError("LinearSystem: A must be square and nonempty");
  if (b_.rows() != a_.rows() || b_.cols() == 0)
    throw DimensionError("LinearSystem: B must have n rows and at least one column");
}

LinearSystem double_integrator_system(double dt) {
  return LinearSystem({{1.0, dt}, {0.0, 1.0}}, {{0.0}, {1.0}}, dt);
}

LinearSystem planar_quadrotor_system(double dt, double mass, double inertia, double gravity) {
  Matrix a = Matrix::identity(6);
  a(0, 1) = dt;             // x     += dt * xdot
  a(1, 4) = -gravity * dt;  // xdot  -= g dt * phi
  a(2, 3) = dt;             // y     += dt * ydot
  a(4, 5) = dt;             // phi   += dt * phidot
  Matrix b(6, 2);
  b(3, 0) = dt / mass;
  b(5, 1) = dt / inertia;
  return LinearSystem(std::move(a), std::move(b), dt);
}

Vector step_mean(const LinearSystem& sys, std::span<const double> x, std::span<const double> a) {
  if (x.size() != sys.state_dim() || a.size() != sys.action_dim())
    throw DimensionError("step_mean: state/action dimension mismatch");
  Vector next = sys.A() * x;
  const Vector ba = sys.B() * a;
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += ba[i];
  return next;
}

Matrix propagate_cov_factor(const LinearSystem& sys, const Matrix& sigma0_bar, unsigned t) {
  if (sigma0_bar.rows() != sys.action_dim())
    throw DimensionError("propagate_cov_factor: factor must have m rows");
  Matrix f = sys.B() * sigma0_bar;
  for (unsigned i = 0; i < t; ++i) f = sys.A() * f;
  return f;
}

Matrix lqr_gain(const LinearSystem& sys, const Matrix& q, const Matrix& r, unsigned max_iter,
                double tol) {
  const std::size_t n = sys.state_dim();
  const std::size_t m = sys.action_dim();
  if (q.rows() != n || q.cols() != n || r.rows() != m || r.cols() != m)
    throw DimensionError("lqr_gain: weight shapes do not match the system");
  const Matrix& a = sys.A();
  const Matrix& b = sys.B();
  const Matrix at = a.transpose();
  const Matrix bt = b.transpose();
  Matrix p = q;
  Matrix k(m, n);
  for (unsigned it = 0; it < max_iter; ++it) {
    // K = (R + B^T P B)^{-1} B^T P A, one column at a time.
    const Matrix btp = bt * p;
    const Matrix lhs = r + btp * b;
    const Matrix rhs = btp * a;
    for (std::size_t j = 0; j < n; ++j) {
      Vector col = rhs.col_vector(j);
      if (!solve_square(lhs, col)) throw std::runtime_error("lqr_gain: singular R + B^T P B");
      for (std::size_t i = 0; i < m; ++i) k(i, j) = col[i];
    }
    const Matrix next = q + at * p * a - at * p * b * k;
    double diff = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        diff = std::max(diff, std::abs(next(i, j) - p(i, j)));
        scale = std::max(scale, std::abs(next(i, j)));
      }
    p = next;
    if (diff <= tol * scale) return k;
  }
  throw std::runtime_error("lqr_gain: Riccati iteration did not converge");
}

PowerCache::PowerCache(const LinearSystem& sys, unsigned max_power) {
  powers_.reserve(max_power + 1);
  responses_.reserve(max_power + 1);
  powers_.push_back(Matrix::identity(sys.state_dim()));
  for (unsigned t = 1; t <= max_power; ++t) powers_.push_back(sys.A() * powers_.back());
  for (const Matrix& p : powers_) responses_.push_back(p * sys.B());
}

}  // namespace sgpg
