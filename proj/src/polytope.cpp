#include "sgpg/polytope.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "sgpg/lp.hpp"

namespace sgpg {

namespace {

constexpr double kZeroTol = 1e-12;

// Augmented row [u | v].
using Row = Vector;

std::vector<Row> to_rows(const Polytope& p) {
  std::vector<Row> rows;
  rows.reserve(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    Row r = p.U().row_vector(i);
    r.push_back(p.v()[i]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// Rows with a zero normal are dropped when trivially true; a single violated
// one collapses the set to the empty marker.
Polytope from_rows(const std::vector<Row>& rows, std::size_t dim) {
  Matrix u(0, dim);
  Vector v;
  for (const Row& r : rows) {
    const std::span<const double> normal(r.data(), dim);
    if (max_abs(normal) <= kZeroTol) {
      if (r[dim] < -1e-12) return Polytope::empty(dim);
      continue;
    }
    u.append_row(normal);
    v.push_back(r[dim]);
  }
  return Polytope(std::move(u), std::move(v));
}

void normalize_row(Row& r, std::size_t dim) {
  const double nrm = norm2(std::span<const double>(r.data(), dim));
  if (nrm > kZeroTol)
    for (double& x : r) x /= nrm;
}

std::vector<std::size_t> constrained_coords(const Polytope& p) {
  std::vector<std::size_t> coords;
  for (std::size_t j = 0; j < p.dim(); ++j) {
    for (std::size_t i = 0; i < p.rows(); ++i) {
      if (std::abs(p.U()(i, j)) > kZeroTol) {
        coords.push_back(j);
        break;
      }
    }
  }
  return coords;
}

Matrix select(const Matrix& m, const std::vector<std::size_t>& rows,
              const std::vector<std::size_t>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

std::vector<std::size_t> complement(const std::vector<std::size_t>& keep, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (std::find(keep.begin(), keep.end(), i) == keep.end()) out.push_back(i);
  return out;
}

Polytope restrict_columns(const Polytope& p, const std::vector<std::size_t>& coords) {
  return Polytope(select(p.U(), all_indices(p.rows()), coords), p.v());
}

Polytope lift_columns(const Polytope& p, const std::vector<std::size_t>& coords, std::size_t dim) {
  if (p.is_empty_marker()) return Polytope::empty(dim);
  Matrix u(p.rows(), dim);
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < coords.size(); ++j) u(i, coords[j]) = p.U()(i, j);
  return Polytope(std::move(u), p.v());
}

// Subsystem on `coords` when the remaining coordinates never feed into them.
bool closed_section(const LinearSystem& sys, const std::vector<std::size_t>& coords,
                    const std::vector<std::size_t>& free) {
  for (std::size_t i : coords)
    for (std::size_t j : free)
      if (sys.A()(i, j) != 0.0) return false;
  return true;
}

LinearSystem section_system(const LinearSystem& sys, const std::vector<std::size_t>& coords) {
  return LinearSystem(select(sys.A(), coords, coords),
                      select(sys.B(), coords, all_indices(sys.action_dim())), sys.dt());
}

}  // namespace

Polytope::Polytope(Matrix u, Vector v) : u_(std::move(u)), v_(std::move(v)) {
  if (u_.rows() != v_.size()) throw DimensionError("Polytope: U rows must match v length");
  const bool marker = u_.rows() == 1 && max_abs(u_.row(0)) == 0.0 && v_[0] < 0.0;
  if (!marker) {
    for (std::size_t i = 0; i < u_.rows(); ++i)
      if (max_abs(u_.row(i)) == 0.0) throw PolytopeError("Polytope: zero row in U");
  }
}

Polytope Polytope::box(std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != hi.size()) throw DimensionError("box: bound lengths differ");
  const std::size_t n = lo.size();
  Matrix u(0, n);
  Vector v;
  Vector row(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (lo[i] > hi[i]) throw PolytopeError("box: lower bound above upper bound");
    std::fill(row.begin(), row.end(), 0.0);
    row[i] = 1.0;
    u.append_row(row);
    v.push_back(hi[i]);
    row[i] = -1.0;
    u.append_row(row);
    v.push_back(-lo[i]);
  }
  return Polytope(std::move(u), std::move(v));
}

Polytope Polytope::universe(std::size_t dim) { return Polytope(Matrix(0, dim), {}); }

Polytope Polytope::empty(std::size_t dim) { return Polytope(Matrix(1, dim, 0.0), {-1.0}); }

bool Polytope::is_empty_marker() const {
  return u_.rows() == 1 && max_abs(u_.row(0)) == 0.0 && v_[0] < 0.0;
}

bool contains(const Polytope& p, std::span<const double> x, double tol) {
  if (x.size() != p.dim()) throw DimensionError("contains: point dimension mismatch");
  for (std::size_t i = 0; i < p.rows(); ++i)
    if (dot(p.U().row(i), x) > p.v()[i] + tol) return false;
  return true;
}

Polytope normalize(const Polytope& p) {
  if (p.is_empty_marker()) return p;
  auto rows = to_rows(p);
  for (Row& r : rows) normalize_row(r, p.dim());
  return from_rows(rows, p.dim());
}

Polytope shrink(const Polytope& p, double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw PolytopeError("shrink: delta must lie in [0, 1)");
  for (double vi : p.v())
    if (!(vi > 0.0))
      throw PolytopeError("shrink: origin is not strictly inside the polytope");
  Vector v = p.v();
  for (double& vi : v) vi *= (1.0 - delta);
  return Polytope(p.U(), std::move(v));
}

Polytope intersect(const Polytope& p, const Polytope& q) {
  if (p.dim() != q.dim()) throw DimensionError("intersect: dimension mismatch");
  if (p.is_empty_marker()) return p;
  if (q.is_empty_marker()) return q;
  Vector v = p.v();
  v.insert(v.end(), q.v().begin(), q.v().end());
  return Polytope(vstack(p.U(), q.U()), std::move(v));
}

Polytope prune_syntactic(const Polytope& p) {
  if (p.is_empty_marker()) return p;
  const std::size_t n = p.dim();
  auto rows = to_rows(p);
  for (Row& r : rows) normalize_row(r, n);
  std::vector<Row> kept;
  for (const Row& r : rows) {
    bool merged = false;
    for (Row& k : kept) {
      double diff = 0.0;
      for (std::size_t j = 0; j < n; ++j) diff = std::max(diff, std::abs(k[j] - r[j]));
      if (diff <= 1e-9) {
        k[n] = std::min(k[n], r[n]);
        merged = true;
        break;
      }
    }
    if (!merged) kept.push_back(r);
  }
  // Opposite parallel rows with v_i + v_j < 0 describe an empty slab.
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      double diff = 0.0;
      for (std::size_t c = 0; c < n; ++c) diff = std::max(diff, std::abs(kept[i][c] + kept[j][c]));
      if (diff <= 1e-9 && kept[i][n] + kept[j][n] < -1e-12) return Polytope::empty(n);
    }
  }
  return from_rows(kept, n);
}

Polytope remove_redundant(const Polytope& p) {
  Polytope q = prune_syntactic(p);
  if (q.is_empty_marker() || q.rows() <= 1) return q;
  if (is_empty(q)) return Polytope::empty(q.dim());
  const std::size_t n = q.dim();
  auto rows = to_rows(q);
  std::vector<bool> keep(rows.size(), true);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Matrix a(0, n);
    Vector b;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (j == i || !keep[j]) continue;
      a.append_row(std::span<const double>(rows[j].data(), n));
      b.push_back(rows[j][n]);
    }
    Vector c(rows[i].begin(), rows[i].begin() + static_cast<std::ptrdiff_t>(n));
    for (double& x : c) x = -x;
    const LpResult r = solve_lp(c, a, b);
    if (r.status == LpStatus::optimal && -r.value <= rows[i][n] + 1e-9) keep[i] = false;
  }
  std::vector<Row> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (keep[i]) out.push_back(rows[i]);
  return from_rows(out, n);
}

Polytope project_out(const Polytope& p, const std::vector<std::size_t>& drop_dims) {
  const std::size_t dim = p.dim();
  for (std::size_t d : drop_dims)
    if (d >= dim) throw DimensionError("project_out: drop index out of range");
  std::vector<std::size_t> keep_dims = complement(drop_dims, dim);
  if (p.is_empty_marker()) return Polytope::empty(keep_dims.size());

  // Work on augmented rows over the live columns; `live` maps column -> original dim.
  std::vector<std::size_t> live = all_indices(dim);
  std::vector<Row> rows = to_rows(p);
  for (Row& r : rows) normalize_row(r, dim);
  std::vector<std::size_t> pending = drop_dims;
  std::sort(pending.begin(), pending.end());
  pending.erase(std::unique(pending.begin(), pending.end()), pending.end());

  while (!pending.empty()) {
    // Eliminate the variable producing the fewest new rows.
    std::size_t best = 0;
    std::size_t best_cost = static_cast<std::size_t>(-1);
    for (std::size_t k = 0; k < pending.size(); ++k) {
      const std::size_t col =
          static_cast<std::size_t>(std::find(live.begin(), live.end(), pending[k]) - live.begin());
      std::size_t pos = 0, neg = 0;
      for (const Row& r : rows) {
        if (r[col] > kZeroTol) ++pos;
        else if (r[col] < -kZeroTol) ++neg;
      }
      const std::size_t cost = pos * neg;
      if (cost < best_cost) {
        best_cost = cost;
        best = k;
      }
    }
    const std::size_t col =
        static_cast<std::size_t>(std::find(live.begin(), live.end(), pending[best]) - live.begin());
    const std::size_t width = live.size();
    std::vector<Row> pos, neg, next;
    for (Row& r : rows) {
      if (r[col] > kZeroTol) pos.push_back(r);
      else if (r[col] < -kZeroTol) neg.push_back(r);
      else next.push_back(r);
    }
    for (const Row& rp : pos) {
      for (const Row& rn : neg) {
        const double sp = 1.0 / rp[col];
        const double sn = -1.0 / rn[col];
        Row comb(width + 1);
        for (std::size_t j = 0; j <= width; ++j) comb[j] = sp * rp[j] + sn * rn[j];
        comb[col] = 0.0;
        next.push_back(std::move(comb));
      }
    }
    // Drop the eliminated column.
    for (Row& r : next) r.erase(r.begin() + static_cast<std::ptrdiff_t>(col));
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(col));
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(best));

    const std::size_t w = live.size();
    std::vector<Row> cleaned;
    for (Row& r : next) {
      const double nrm = norm2(std::span<const double>(r.data(), w));
      if (nrm <= 1e-11) {
        if (r[w] < -1e-9) return Polytope::empty(keep_dims.size());
        continue;
      }
      for (double& x : r) x /= nrm;
      cleaned.push_back(std::move(r));
    }
    Polytope stage = prune_syntactic(from_rows(cleaned, w));
    if (stage.is_empty_marker()) return Polytope::empty(keep_dims.size());
    if (stage.rows() > 64) stage = remove_redundant(stage);
    if (stage.is_empty_marker()) return Polytope::empty(keep_dims.size());
    rows = to_rows(stage);
  }
  return from_rows(rows, live.size());
}

bool is_empty(const Polytope& p) {
  if (p.is_empty_marker()) return true;
  return !lp_feasible(p.U(), p.v());
}

bool is_bounded(const Polytope& p) {
  if (p.is_empty_marker()) return true;
  const std::size_t n = p.dim();
  for (std::size_t i = 0; i < n; ++i) {
    for (double s : {1.0, -1.0}) {
      Vector c(n, 0.0);
      c[i] = s;
      const LpResult r = solve_lp(c, p.U(), p.v());
      if (r.status == LpStatus::unbounded) return false;
    }
  }
  return true;
}

bool is_subset(const Polytope& p, const Polytope& q, double tol) {
  if (p.dim() != q.dim()) throw DimensionError("is_subset: dimension mismatch");
  if (is_empty(p)) return true;
  if (q.is_empty_marker()) return false;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    Vector c = q.U().row_vector(i);
    for (double& x : c) x = -x;
    const LpResult r = solve_lp(c, p.U(), p.v());
    if (r.status != LpStatus::optimal) return false;
    if (-r.value > q.v()[i] + tol) return false;
  }
  return true;
}

std::vector<Vector> vertices(const Polytope& p, std::size_t max_combinations) {
  std::vector<Vector> out;
  if (p.is_empty_marker()) return out;
  const std::size_t n = p.dim();
  const std::size_t r = p.rows();
  if (r < n) return out;
  // Budget check on C(r, n).
  double combos = 1.0;
  for (std::size_t k = 0; k < n; ++k) combos = combos * static_cast<double>(r - k) / static_cast<double>(k + 1);
  if (combos > static_cast<double>(max_combinations))
    throw PolytopeError("vertex enumeration overflow: too many row combinations");

  const Polytope q = normalize(p);
  std::vector<std::size_t> idx(n);
  for (std::size_t k = 0; k < n; ++k) idx[k] = k;
  for (;;) {
    Matrix a(n, n);
    Vector b(n);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < n; ++j) a(k, j) = q.U()(idx[k], j);
      b[k] = q.v()[idx[k]];
    }
    if (solve_square(a, b, 1e-10) && contains(q, b, 1e-9 * (1.0 + max_abs(b)))) {
      bool dup = false;
      for (const Vector& w : out) {
        if (max_abs(sub(w, b)) <= 1e-9 * (1.0 + max_abs(b))) {
          dup = true;
          break;
        }
      }
      if (!dup) out.push_back(b);
    }
    // Next combination in lexicographic order.
    std::size_t k = n;
    while (k > 0 && idx[k - 1] == r - n + k - 1) --k;
    if (k == 0) break;
    ++idx[k - 1];
    for (std::size_t j = k; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

Polytope one_step_preimage(const LinearSystem& sys, const Polytope& target,
                           const Polytope& abox) {
  const std::size_t n = sys.state_dim();
  const std::size_t m = sys.action_dim();
  if (target.dim() != n || abox.dim() != m)
    throw DimensionError("one_step_preimage: dimension mismatch");
  if (target.is_empty_marker() || abox.is_empty_marker()) return Polytope::empty(n + m);
  const Matrix state_part = hstack(target.U() * sys.A(), target.U() * sys.B());
  const Matrix action_part = hstack(Matrix(abox.rows(), n), abox.U());
  std::vector<Row> rows;
  for (std::size_t i = 0; i < state_part.rows(); ++i) {
    Row r = state_part.row_vector(i);
    r.push_back(target.v()[i]);
    rows.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < action_part.rows(); ++i) {
    Row r = action_part.row_vector(i);
    r.push_back(abox.v()[i]);
    rows.push_back(std::move(r));
  }
  return from_rows(rows, n + m);
}

namespace {

Polytope invariant_iteration(const LinearSystem& sys, const Polytope& safe,
                             const Polytope& abox, const InvariantSetOptions& opts) {
  const std::size_t n = sys.state_dim();
  const std::size_t m = sys.action_dim();
  std::vector<std::size_t> action_dims;
  for (std::size_t j = 0; j < m; ++j) action_dims.push_back(n + j);

  Polytope omega = remove_redundant(safe);
  if (is_empty(omega)) throw PolytopeError("no invariant subset found within iteration budget");
  for (unsigned k = 0; k < opts.max_iter; ++k) {
    const Polytope pre = project_out(one_step_preimage(sys, omega, abox), action_dims);
    Polytope next = remove_redundant(intersect(omega, pre));
    if (is_empty(next)) throw PolytopeError("no invariant subset found within iteration budget");
    if (is_subset(omega, next, opts.fixpoint_tol)) return next;
    omega = std::move(next);
  }
  if (verify_invariance(sys, omega, abox)) return omega;
  throw PolytopeError("no invariant subset found within iteration budget");
}

}  // namespace

Polytope compute_invariant_set(const LinearSystem& sys, const Polytope& safe,
                               const Polytope& abox, const InvariantSetOptions& opts) {
  if (opts.max_iter < 1) throw PolytopeError("compute_invariant_set: max_iter must be >= 1");
  if (safe.dim() != sys.state_dim() || abox.dim() != sys.action_dim())
    throw DimensionError("compute_invariant_set: dimension mismatch");
  const std::vector<std::size_t> coords = constrained_coords(safe);
  const std::vector<std::size_t> free = complement(coords, safe.dim());
  if (!free.empty() && !coords.empty() && closed_section(sys, coords, free)) {
    const Polytope section = invariant_iteration(
        section_system(sys, coords), restrict_columns(safe, coords), abox, opts);
    return lift_columns(section, coords, safe.dim());
  }
  return invariant_iteration(sys, safe, abox, opts);
}

bool verify_invariance(const LinearSystem& sys, const Polytope& omega, const Polytope& abox) {
  if (omega.dim() != sys.state_dim() || abox.dim() != sys.action_dim())
    throw DimensionError("verify_invariance: dimension mismatch");
  if (is_empty(omega)) return true;
  const std::vector<std::size_t> coords = constrained_coords(omega);
  const std::vector<std::size_t> free = complement(coords, omega.dim());

  LinearSystem section_sys = sys;
  Polytope section = omega;
  if (!free.empty()) {
    // Lines along free coordinates must map into the lineality space:
    // U_C A[C, F] = 0. Otherwise a far enough point along them escapes.
    const Matrix uc = restrict_columns(omega, coords).U();
    const Matrix acf = select(sys.A(), coords, free);
    const Matrix prod = uc * acf;
    if (max_abs(std::span<const double>(prod.data(), prod.rows() * prod.cols())) > 1e-12)
      return false;
    section_sys = section_system(sys, coords);
    section = restrict_columns(omega, coords);
  }
  if (!is_bounded(section))
    throw PolytopeError("verify_invariance: constrained section of omega must be bounded");

  const Matrix ub = section.U() * section_sys.B();
  const Matrix ua = section.U() * section_sys.A();
  for (const Vector& x : vertices(section)) {
    const Vector drift = ua * x;
    Matrix a = vstack(ub, abox.U());
    Vector b(section.rows() + abox.rows());
    for (std::size_t i = 0; i < section.rows(); ++i) b[i] = section.v()[i] - drift[i];
    for (std::size_t i = 0; i < abox.rows(); ++i) b[section.rows() + i] = abox.v()[i];
    if (!lp_feasible(a, b)) return false;
  }
  return true;
}

std::string format_polytope(const Polytope& p) {
  // Shortest round-trip representation.
  auto put = [](std::string& out, double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    out.append(buf, r.ptr);
  };
  std::string out;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.dim(); ++j) {
      put(out, p.U()(i, j));
      out += ' ';
    }
    out += "<= ";
    put(out, p.v()[i]);
    out += '\n';
  }
  return out;
}

Polytope parse_polytope_rows(const std::vector<std::string>& lines, std::size_t dim) {
  Matrix u(0, dim);
  Vector v;
  std::size_t lineno = 0;
  for (const std::string& raw : lines) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto le = line.find("<=");
    if (le == std::string::npos)
      throw PolytopeError("polytope row " + std::to_string(lineno) + ": missing '<='");
    std::istringstream lhs(line.substr(0, le));
    std::istringstream rhs(line.substr(le + 2));
    Vector row;
    double x;
    while (lhs >> x) row.push_back(x);
    if (!lhs.eof())
      throw PolytopeError("polytope row " + std::to_string(lineno) + ": bad coefficient");
    if (row.size() != dim)
      throw PolytopeError("polytope row " + std::to_string(lineno) + ": expected " +
                          std::to_string(dim) + " coefficients, got " + std::to_string(row.size()));
    double offset;
    std::string extra;
    if (!(rhs >> offset) || (rhs >> extra))
      throw PolytopeError("polytope row " + std::to_string(lineno) + ": bad right-hand side");
    if (max_abs(row) == 0.0)
      throw PolytopeError("polytope row " + std::to_string(lineno) + ": zero normal");
    u.append_row(row);
    v.push_back(offset);
  }
  return Polytope(std::move(u), std::move(v));
}

Polytope parse_polytope(const std::string& text, std::size_t dim) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return parse_polytope_rows(lines, dim);
}

}  // namespace sgpg
