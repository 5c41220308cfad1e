#pragma once

// H-representation polytopes {x : U x <= v} and control-invariant set
// construction for LTI systems with polytopic input constraints.

#include <stdexcept>
#include <string>
#include <vector>

#include "sgpg/dynamics.hpp"
#include "sgpg/linalg.hpp"

namespace sgpg {

class PolytopeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Polytope {
 public:
  Polytope() = default;
  // Every row of U must be nonzero; use Polytope::empty for the empty set.
  Polytope(Matrix u, Vector v);

  static Polytope box(std::span<const double> lo, std::span<const double> hi);
  static Polytope universe(std::size_t dim);
  // Canonical empty set: the single infeasible row 0^T x <= -1.
  static Polytope empty(std::size_t dim);

  std::size_t dim() const { return u_.cols(); }
  std::size_t rows() const { return u_.rows(); }
  const Matrix& U() const { return u_; }
  const Vector& v() const { return v_; }
  bool is_empty_marker() const;

 private:
  Matrix u_;
  Vector v_;
};

bool contains(const Polytope& p, std::span<const double> x, double tol = 1e-9);
Polytope normalize(const Polytope& p);
// {x : U x <= (1 - delta) v}. The origin must lie strictly inside p.
Polytope shrink(const Polytope& p, double delta);
Polytope intersect(const Polytope& p, const Polytope& q);
// Orthogonal projection eliminating `drop_dims` (Fourier-Motzkin).
Polytope project_out(const Polytope& p, const std::vector<std::size_t>& drop_dims);
// Removes duplicate and parallel-dominated rows, then LP-redundant rows.
Polytope remove_redundant(const Polytope& p);
Polytope prune_syntactic(const Polytope& p);
bool is_empty(const Polytope& p);
bool is_bounded(const Polytope& p);
// p subset of q, each row of q checked by LP to within tol.
bool is_subset(const Polytope& p, const Polytope& q, double tol = 1e-7);
// Vertices of a bounded polytope; throws PolytopeError past the combination budget.
std::vector<Vector> vertices(const Polytope& p, std::size_t max_combinations = 5'000'000);

// Row-space image of constraints on x' = A x + B a together with a in Abox,
// as a polytope over (x, a).
Polytope one_step_preimage(const LinearSystem& sys, const Polytope& target,
                           const Polytope& abox);

struct InvariantSetOptions {
  unsigned max_iter = 200;
  double fixpoint_tol = 1e-7;
};

// Omega_0 = S, Omega_{k+1} = Omega_k intersect Pre(Omega_k) until a fixpoint.
Polytope compute_invariant_set(const LinearSystem& sys, const Polytope& safe,
                               const Polytope& abox, const InvariantSetOptions& opts = {});

// True iff every state of omega admits an action in abox keeping the next
// state in omega. Coordinates unconstrained by omega are handled exactly
// through the lineality condition; the remaining section must be bounded.
bool verify_invariance(const LinearSystem& sys, const Polytope& omega, const Polytope& abox);

// Plain-text format: one "u_1 ... u_n <= v" row per line, '#' comments.
std::string format_polytope(const Polytope& p);
Polytope parse_polytope(const std::string& text, std::size_t dim);
Polytope parse_polytope_rows(const std::vector<std::string>& rows, std::size_t dim);

}  // namespace sgpg
