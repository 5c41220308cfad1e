#pragma once

// Dense linear programming for the polytope routines (redundancy pruning,
// inclusion tests, per-vertex invariance checks). Problems here have few
// variables (<= 8) and many rows, so we run a tableau simplex on the dual
//   min b^T y  s.t.  A^T y = -c, y >= 0
// whose tableau is only n rows tall. Bland's rule keeps pivoting
// deterministic and cycle-free.

#include "sgpg/linalg.hpp"

namespace sgpg {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Vector x;            // primal minimizer (valid when optimal)
  double value = 0.0;  // c^T x
  int pivots = 0;
};

// minimize c^T x  subject to  A x <= b, x free.
LpResult solve_lp(std::span<const double> c, const Matrix& a, std::span<const double> b);

// Feasibility of {x : A x <= b}; fills `point` with a feasible x when true.
bool lp_feasible(const Matrix& a, std::span<const double> b, Vector* point = nullptr);

}  // namespace sgpg
