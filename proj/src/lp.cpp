#include "sgpg/lp.hpp"

#include <cmath>
#include <limits>

namespace sgpg {

namespace {

constexpr double kPivotTol = 1e-10;
constexpr double kCostTol = 1e-10;

// Standard-form tableau: n equality rows over `cols` nonnegative columns, the
// last n of which are artificials forming the initial basis.
class Tableau {
 public:
  Tableau(const Matrix& a, std::span<const double> c)
      : n_(a.cols()), m_(a.rows()), cols_(m_ + n_), t_(n_, cols_), rhs_(n_), sign_(n_, 1.0),
        basis_(n_) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double r = -c[i];
      sign_[i] = r < 0.0 ? -1.0 : 1.0;
      rhs_[i] = sign_[i] * r;
      for (std::size_t j = 0; j < m_; ++j) t_(i, j) = sign_[i] * a(j, i);
      t_(i, m_ + i) = 1.0;
      basis_[i] = m_ + i;
    }
  }

  // Runs the simplex with the given column costs. Artificial columns may only
  // enter when allow_artificial is set. Returns false on unboundedness.
  bool run(const Vector& cost, bool allow_artificial, int& pivots) {
    reduced_.assign(cols_, 0.0);
    for (std::size_t j = 0; j < cols_; ++j) {
      double z = 0.0;
      for (std::size_t i = 0; i < n_; ++i) z += cost[basis_[i]] * t_(i, j);
      reduced_[j] = cost[j] - z;
    }
    const std::size_t limit = allow_artificial ? cols_ : m_;
    for (;;) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < limit; ++j) {
        if (reduced_[j] < -kCostTol && !is_basic(j)) {
          enter = j;
          break;
        }
      }
      if (enter == cols_) return true;
      std::size_t leave = n_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n_; ++i) {
        const double p = t_(i, enter);
        if (p > kPivotTol) {
          const double ratio = rhs_[i] / p;
          if (ratio < best - 1e-14 ||
              (std::abs(ratio - best) <= 1e-14 && leave < n_ && basis_[i] < basis_[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave == n_) return false;
      pivot(leave, enter);
      ++pivots;
    }
  }

  double objective(const Vector& cost) const {
    double z = 0.0;
    for (std::size_t i = 0; i < n_; ++i) z += cost[basis_[i]] * rhs_[i];
    return z;
  }

  // Pivots zero-level artificials out of the basis where a structural column
  // can replace them.
  void expel_artificials() {
    for (std::size_t i = 0; i < n_; ++i) {
      if (basis_[i] < m_) continue;
      for (std::size_t j = 0; j < m_; ++j) {
        if (std::abs(t_(i, j)) > 1e-9 && !is_basic(j)) {
          pivot(i, j);
          break;
        }
      }
    }
  }

  // Simplex multipliers of the original (unflipped) equality rows, read off
  // the reduced costs of the zero-cost artificial columns.
  Vector multipliers() const {
    Vector x(n_);
    for (std::size_t i = 0; i < n_; ++i) x[i] = -reduced_[m_ + i] * sign_[i];
    return x;
  }

  std::size_t structural() const { return m_; }
  std::size_t columns() const { return cols_; }

 private:
  bool is_basic(std::size_t j) const {
    for (std::size_t b : basis_)
      if (b == j) return true;
    return false;
  }

  void pivot(std::size_t r, std::size_t e) {
    const double p = t_(r, e);
    for (std::size_t j = 0; j < cols_; ++j) t_(r, j) /= p;
    rhs_[r] /= p;
    for (std::size_t i = 0; i < n_; ++i) {
      if (i == r) continue;
      const double f = t_(i, e);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) t_(i, j) -= f * t_(r, j);
      rhs_[i] -= f * rhs_[r];
      if (rhs_[i] < 0.0 && rhs_[i] > -1e-12) rhs_[i] = 0.0;
    }
    if (!reduced_.empty()) {
      const double f = reduced_[e];
      if (f != 0.0)
        for (std::size_t j = 0; j < cols_; ++j) reduced_[j] -= f * t_(r, j);
    }
    basis_[r] = e;
  }

  std::size_t n_, m_, cols_;
  Matrix t_;
  Vector rhs_, sign_, reduced_;
  std::vector<std::size_t> basis_;
};

// Returns true iff the dual phase 1 succeeds (dual feasible).
bool dual_phase1(Tableau& tab, int& pivots) {
  Vector cost(tab.columns(), 0.0);
  for (std::size_t j = tab.structural(); j < tab.columns(); ++j) cost[j] = 1.0;
  tab.run(cost, true, pivots);
  if (tab.objective(cost) > 1e-8) return false;
  tab.expel_artificials();
  return true;
}

LpResult solve_impl(std::span<const double> c, const Matrix& a, std::span<const double> b,
                    bool classify_infeasible);

}  // namespace

LpResult solve_lp(std::span<const double> c, const Matrix& a, std::span<const double> b) {
  if (a.cols() != c.size() || a.rows() != b.size()) throw DimensionError("solve_lp");
  return solve_impl(c, a, b, true);
}

namespace {

LpResult solve_impl(std::span<const double> c, const Matrix& a, std::span<const double> b,
                    bool classify_infeasible) {
  LpResult res;
  const std::size_t n = a.cols();
  if (a.rows() == 0) {
    const bool zero = max_abs(c) == 0.0;
    res.status = zero ? LpStatus::optimal : LpStatus::unbounded;
    res.x.assign(n, 0.0);
    return res;
  }
  Tableau tab(a, c);
  if (!dual_phase1(tab, res.pivots)) {
    // Dual infeasible: the primal is unbounded or infeasible.
    res.status = classify_infeasible && lp_feasible(a, b) ? LpStatus::unbounded
                                                           : LpStatus::infeasible;
    return res;
  }
  Vector cost(tab.columns(), 0.0);
  for (std::size_t j = 0; j < tab.structural(); ++j) cost[j] = b[j];
  if (!tab.run(cost, false, res.pivots)) {
    res.status = LpStatus::infeasible;
    return res;
  }
  res.status = LpStatus::optimal;
  res.x = tab.multipliers();
  res.value = dot(c, res.x);
  return res;
}

}  // namespace

bool lp_feasible(const Matrix& a, std::span<const double> b, Vector* point) {
  const std::size_t n = a.cols();
  if (a.rows() == 0) {
    if (point) point->assign(n, 0.0);
    return true;
  }
  // Phase-1 in the primal: min s s.t. A x - s 1 <= b, s >= -1. Feasible iff s* <= 0.
  Matrix ext(0, n + 1);
  Vector rhs;
  Vector row(n + 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < n; ++j) row[j] = a(i, j);
    row[n] = -1.0;
    ext.append_row(row);
    rhs.push_back(b[i]);
  }
  std::fill(row.begin(), row.end(), 0.0);
  row[n] = -1.0;
  ext.append_row(row);
  rhs.push_back(1.0);
  Vector c(n + 1, 0.0);
  c[n] = 1.0;
  const LpResult r = solve_impl(c, ext, rhs, false);
  if (r.status != LpStatus::optimal) return false;
  const double scale = 1.0 + max_abs(b);
  if (r.x[n] > 1e-9 * scale) return false;
  if (point) point->assign(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(n));
  return true;
}

}  // namespace sgpg
