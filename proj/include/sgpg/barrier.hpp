#pragma once

// Primal log-barrier Newton method for small smooth convex programs of the
// form
//
//   minimize   lin^T z + sum_k KL_k(z)
//   subject to g_i^T z + c_i ||F_i z|| + tau_i z[tail_i] <= h_i
//
// where each KL_k is the diagonal Gaussian divergence of one (mean, std)
// coordinate pair against a fixed reference. Variables split into a dense
// "head" block and a "tail" block of slack-like variables; every constraint
// touches at most one tail variable, so the tail Hessian is diagonal and is
// eliminated by a Schur complement before the Cholesky solve.

#include <functional>
#include <optional>
#include <vector>

#include "sgpg/chance.hpp"
#include "sgpg/linalg.hpp"

namespace sgpg::barrier {

struct KlTerm {
  std::size_t mean_idx = 0;
  std::size_t std_idx = 0;
  double ref_mean = 0.0;
  double ref_std = 1.0;
};

// Compact constraint: the head gradient lives on [begin, end), the norm term
// acts on head columns [f_begin, f_begin + F.cols()).
struct Cone {
  std::size_t begin = 0;
  std::size_t end = 0;
  Vector g;  // length end - begin
  double h = 0.0;
  double c = 0.0;
  std::size_t f_begin = 0;
  Matrix F;
  std::optional<std::size_t> tail;
  double tail_coef = 0.0;
};

// Drops structural zeros from a dense SocConstraint over `head` variables.
Cone compact(const SocConstraint& con, std::size_t head);

struct Problem {
  std::size_t head = 0;
  std::size_t tail = 0;
  Vector linear;  // head + tail entries; may be empty for zero
  std::vector<KlTerm> kl;
  std::vector<Cone> cones;

  std::size_t size() const { return head + tail; }
};

struct Options {
  double mu0 = 1.0;
  double mu_factor = 10.0;
  double gap_tol = 1e-8;      // stop when (#constraints) * mu <= gap_tol
  double newton_tol = 1e-9;   // centering stop on lambda^2 / 2 at the final stage
  double center_tol = 1e-3;   // looser centering on the intermediate stages
  int max_newton_iter = 300;
};

struct Result {
  Vector z;
  double objective = 0.0;
  double gap = 0.0;  // duality-gap surrogate at exit
  int newton_iters = 0;
  bool converged = false;
  bool early_exit = false;
};

// Value of the constraint function (<= 0 is feasible).
double cone_value(const Cone& c, std::span<const double> z, std::size_t head);
double objective_value(const Problem& p, std::span<const double> z);

// z0 must be strictly feasible. `early_exit` is polled after every Newton
// step; returning true stops the solve with the current iterate.
Result minimize(const Problem& p, Vector z0, const Options& opts,
                const std::function<bool(std::span<const double>)>& early_exit = {});

}  // namespace sgpg::barrier
