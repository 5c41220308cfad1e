#include "sgpg/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgpg/kernels.hpp"

namespace sgpg::barrier {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Rows batched into one syrk call when consecutive cones share a support.
constexpr std::size_t kGroupRows = 16;

double kl_value(const KlTerm& k, double mean, double s) {
  if (!(s > 0.0)) return kInf;
  const double d = mean - k.ref_mean;
  const double p2 = k.ref_std * k.ref_std;
  return std::log(k.ref_std / s) + (s * s + d * d) / (2.0 * p2) - 0.5;
}

double norm_term(const kernels::KernelTable& kt, const Cone& c, const double* z, double* q) {
  double r2 = 0.0;
  for (std::size_t i = 0; i < c.F.rows(); ++i) {
    const double qi = kt.dot(c.F.data() + i * c.F.cols(), z + c.f_begin, c.F.cols());
    if (q) q[i] = qi;
    r2 += qi * qi;
  }
  return std::sqrt(r2);
}

double cone_value_impl(const kernels::KernelTable& kt, const Cone& c, const double* z,
                       std::size_t head) {
  double f = kt.dot(c.g.data(), z + c.begin, c.end - c.begin) - c.h;
  if (c.c != 0.0 && c.F.rows() > 0) f += c.c * norm_term(kt, c, z, nullptr);
  if (c.tail) f += c.tail_coef * z[head + *c.tail];
  return f;
}

class Workspace {
 public:
  explicit Workspace(const Problem& p) : p_(p), kt_(kernels::active()) {
    const std::size_t n = p.head;
    const std::size_t nc = p.cones.size();
    hess_.resize(n * n);
    fac_.resize(n * n);
    rhs_.resize(n);
    grad_.resize(p.size());
    diag_.resize(p.tail);
    cross_.resize(p.tail * n);
    step_.resize(p.size());
    ftq_.resize(n);
    group_.resize(kGroupRows * n);
    group_alpha_.resize(kGroupRows);
    lin0_.resize(nc);
    lin1_.resize(nc);
    qoff_.resize(nc + 1, 0);
    for (std::size_t i = 0; i < nc; ++i) {
      const Cone& c = p.cones[i];
      qoff_[i + 1] = qoff_[i] + (c.c != 0.0 ? c.F.rows() : 0);
    }
    q0_.resize(qoff_[nc]);
    q1_.resize(qoff_[nc]);
  }

  // Gradient and Hessian of t * obj + barrier at z. False if z is outside
  // the domain.
  bool assemble(double t, const Vector& z) {
    const Problem& p = p_;
    const std::size_t n = p.head;
    std::fill(hess_.begin(), hess_.end(), 0.0);
    std::fill(grad_.begin(), grad_.end(), 0.0);
    std::fill(diag_.begin(), diag_.end(), 0.0);
    std::fill(cross_.begin(), cross_.end(), 0.0);

    if (!p.linear.empty())
      for (std::size_t j = 0; j < p.size(); ++j) grad_[j] = t * p.linear[j];
    for (const KlTerm& kl : p.kl) {
      const double s = z[kl.std_idx];
      if (!(s > 0.0)) return false;
      const double p2 = kl.ref_std * kl.ref_std;
      grad_[kl.mean_idx] += t * (z[kl.mean_idx] - kl.ref_mean) / p2;
      grad_[kl.std_idx] += t * (-1.0 / s + s / p2);
      hess_[kl.mean_idx * n + kl.mean_idx] += t / p2;
      hess_[kl.std_idx * n + kl.std_idx] += t * (1.0 / (s * s) + 1.0 / p2);
    }

    rows_ = 0;
    gbegin_ = gend_ = 0;
    for (std::size_t ci = 0; ci < p.cones.size(); ++ci) {
      const Cone& c = p.cones[ci];
      const std::size_t len = c.end - c.begin;
      if (rows_ > 0 && (c.begin != gbegin_ || c.end != gend_ || rows_ == kGroupRows)) flush();
      gbegin_ = c.begin;
      gend_ = c.end;
      double* df = group_.data() + rows_ * n;
      std::copy(c.g.begin(), c.g.end(), df);

      double f = kt_.dot(c.g.data(), z.data() + c.begin, len) - c.h;
      double lin = f;
      double r = 0.0;
      const std::size_t kf = c.c != 0.0 ? c.F.rows() : 0;
      const std::size_t fc = c.F.cols();
      double* q = q0_.data() + qoff_[ci];
      if (kf > 0) {
        r = norm_term(kt_, c, z.data(), q);
        f += c.c * r;
        if (r > 1e-300) {
          std::fill(ftq_.begin(), ftq_.begin() + static_cast<std::ptrdiff_t>(fc), 0.0);
          kt_.gemv_t(c.F.data(), kf, fc, fc, q, ftq_.data());
          const std::size_t off = c.f_begin - c.begin;
          for (std::size_t j = 0; j < fc; ++j) df[off + j] += c.c * ftq_[j] / r;
        }
      }
      if (c.tail) {
        const double tv = c.tail_coef * z[n + *c.tail];
        f += tv;
        lin += tv;
      }
      if (!(f < 0.0)) return false;
      lin0_[ci] = lin;
      const double inv = -1.0 / f;

      kt_.axpy(inv, df, grad_.data() + c.begin, len);
      // Norm curvature, scaled by 1 / (-f).
      if (kf > 0 && r > 1e-300) {
        const double s = c.c * inv / r;
        for (std::size_t a = 0; a < fc; ++a) {
          for (std::size_t b = 0; b <= a; ++b) {
            double ftf = 0.0;
            for (std::size_t i = 0; i < kf; ++i) ftf += c.F(i, a) * c.F(i, b);
            hess_[(c.f_begin + a) * n + c.f_begin + b] += s * (ftf - ftq_[a] * ftq_[b] / (r * r));
          }
        }
      }
      if (c.tail) {
        const std::size_t tk = *c.tail;
        grad_[n + tk] += inv * c.tail_coef;
        diag_[tk] += inv * inv * c.tail_coef * c.tail_coef;
        kt_.axpy(inv * inv * c.tail_coef, df, cross_.data() + tk * n + c.begin, len);
      }
      group_alpha_[rows_++] = inv * inv;
    }
    if (rows_ > 0) flush();
    return true;
  }

  // Newton direction; false if the reduced Hessian is not positive definite.
  bool solve() {
    const std::size_t n = p_.head;
    for (std::size_t j = 0; j < n; ++j) rhs_[j] = -grad_[j];
    // Schur complement of the diagonal tail block.
    for (std::size_t tk = 0; tk < p_.tail; ++tk) {
      const double d = diag_[tk];
      if (!(d > 0.0)) return false;
      const double* b = cross_.data() + tk * n;
      kt_.syr_lower(-1.0 / d, b, hess_.data(), n, n);
      kt_.axpy(grad_[n + tk] / d, b, rhs_.data(), n);
    }
    double scale = 0.0;
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(hess_[j * n + j]));
    double reg = 0.0;
    for (int attempt = 0;; ++attempt) {
      fac_ = hess_;
      for (std::size_t j = 0; j < n; ++j) fac_[j * n + j] += reg;
      if (cholesky_lower(fac_.data(), n, n, 1e-300)) break;
      if (attempt == 8) return false;
      reg = reg == 0.0 ? 1e-12 * (1.0 + scale) : reg * 100.0;
    }
    cholesky_solve(fac_.data(), n, n, rhs_.data());
    std::copy(rhs_.begin(), rhs_.end(), step_.begin());
    for (std::size_t tk = 0; tk < p_.tail; ++tk) {
      const double* b = cross_.data() + tk * n;
      step_[n + tk] = (-grad_[n + tk] - kt_.dot(b, rhs_.data(), n)) / diag_[tk];
    }
    return true;
  }

  // Precomputes each constraint along the ray z + alpha * step.
  void prepare_line(const Vector& z) {
    const std::size_t n = p_.head;
    obj_lin0_ = obj_lin1_ = 0.0;
    if (!p_.linear.empty()) {
      obj_lin0_ = kt_.dot(p_.linear.data(), z.data(), p_.size());
      obj_lin1_ = kt_.dot(p_.linear.data(), step_.data(), p_.size());
    }
    alpha_max_ = kInf;
    for (std::size_t ci = 0; ci < p_.cones.size(); ++ci) {
      const Cone& c = p_.cones[ci];
      double d = kt_.dot(c.g.data(), step_.data() + c.begin, c.end - c.begin);
      if (c.tail) d += c.tail_coef * step_[n + *c.tail];
      lin1_[ci] = d;
      const std::size_t kf = c.c != 0.0 ? c.F.rows() : 0;
      if (kf > 0) {
        double* q = q1_.data() + qoff_[ci];
        for (std::size_t i = 0; i < kf; ++i)
          q[i] = kt_.dot(c.F.data() + i * c.F.cols(), step_.data() + c.f_begin, c.F.cols());
      } else if (d > 0.0) {
        alpha_max_ = std::min(alpha_max_, -lin0_[ci] / d);
      }
    }
  }

  // Largest step keeping every linear constraint strictly satisfied.
  double alpha_max() const { return alpha_max_; }

  // phi(z + alpha * step) - phi(z) for phi = t * obj + barrier. The barrier
  // part is a sum of log ratios, taken as one log of a running product.
  double merit_delta(double t, const Vector& z, double alpha) const {
    double dobj = alpha * obj_lin1_;
    for (const KlTerm& kl : p_.kl) {
      const double m0 = z[kl.mean_idx], s0 = z[kl.std_idx];
      const double m1 = m0 + alpha * step_[kl.mean_idx], s1 = s0 + alpha * step_[kl.std_idx];
      if (!(s1 > 0.0)) return kInf;
      const double p2 = kl.ref_std * kl.ref_std;
      const double d0 = m0 - kl.ref_mean, d1 = m1 - kl.ref_mean;
      dobj += std::log(s0 / s1) + ((s1 * s1 - s0 * s0) + (d1 * d1 - d0 * d0)) / (2.0 * p2);
    }
    double logs = 0.0;
    double prod = 1.0;
    for (std::size_t ci = 0; ci < p_.cones.size(); ++ci) {
      const Cone& c = p_.cones[ci];
      const double base = lin0_[ci];
      double f0 = base;
      double f1 = base + alpha * lin1_[ci];
      const std::size_t kf = c.c != 0.0 ? c.F.rows() : 0;
      if (kf > 0) {
        const double* q0 = q0_.data() + qoff_[ci];
        const double* q1 = q1_.data() + qoff_[ci];
        double r0 = 0.0, r1 = 0.0;
        for (std::size_t i = 0; i < kf; ++i) {
          const double qi = q0[i] + alpha * q1[i];
          r0 += q0[i] * q0[i];
          r1 += qi * qi;
        }
        f0 += c.c * std::sqrt(r0);
        f1 += c.c * std::sqrt(r1);
      }
      if (!(f1 < 0.0)) return kInf;
      prod *= f1 / f0;
      if (prod > 1e150 || prod < 1e-150) {
        logs += std::log(prod);
        prod = 1.0;
      }
    }
    logs += std::log(prod);
    return t * dobj - logs;
  }

  const Vector& grad() const { return grad_; }
  const Vector& step() const { return step_; }

 private:
  void flush() {
    kt_.syrk_lower(group_.data(), rows_, p_.head, group_alpha_.data(),
                   hess_.data() + gbegin_ * p_.head + gbegin_, gend_ - gbegin_, p_.head);
    rows_ = 0;
  }

  const Problem& p_;
  const kernels::KernelTable& kt_;
  Vector hess_, fac_, rhs_, grad_, diag_, cross_, step_, ftq_;
  Vector group_, group_alpha_;
  std::size_t rows_ = 0, gbegin_ = 0, gend_ = 0;
  Vector lin0_, lin1_, q0_, q1_;
  std::vector<std::size_t> qoff_;
  double obj_lin0_ = 0.0, obj_lin1_ = 0.0, alpha_max_ = kInf;
};

}  // namespace

Cone compact(const SocConstraint& con, std::size_t head) {
  const std::size_t total = con.g.size();
  if (head > total) throw DimensionError("compact: head larger than variable count");
  if (con.F.rows() > 0 && con.F.cols() != total)
    throw DimensionError("compact: F width does not match g");
  Cone c;
  c.h = con.h;
  c.c = con.c;
  std::size_t lo = head, hi = 0;
  for (std::size_t j = 0; j < head; ++j) {
    if (con.g[j] != 0.0) {
      lo = std::min(lo, j);
      hi = std::max(hi, j + 1);
    }
  }
  std::size_t flo = head, fhi = 0;
  if (con.c != 0.0) {
    for (std::size_t j = 0; j < total; ++j) {
      for (std::size_t i = 0; i < con.F.rows(); ++i) {
        if (con.F(i, j) != 0.0) {
          if (j >= head) throw DimensionError("compact: norm term touches a tail variable");
          flo = std::min(flo, j);
          fhi = std::max(fhi, j + 1);
        }
      }
    }
  }
  if (fhi > flo) {
    lo = std::min(lo, flo);
    hi = std::max(hi, fhi);
    c.f_begin = flo;
    c.F = Matrix(con.F.rows(), fhi - flo);
    for (std::size_t i = 0; i < con.F.rows(); ++i)
      for (std::size_t j = flo; j < fhi; ++j) c.F(i, j - flo) = con.F(i, j);
  } else {
    c.c = 0.0;
  }
  if (hi <= lo) lo = hi = 0;
  c.begin = lo;
  c.end = hi;
  c.g.assign(con.g.begin() + static_cast<std::ptrdiff_t>(lo),
             con.g.begin() + static_cast<std::ptrdiff_t>(hi));
  for (std::size_t j = head; j < total; ++j) {
    if (con.g[j] != 0.0) {
      if (c.tail) throw DimensionError("compact: constraint touches two tail variables");
      c.tail = j - head;
      c.tail_coef = con.g[j];
    }
  }
  return c;
}

double cone_value(const Cone& c, std::span<const double> z, std::size_t head) {
  return cone_value_impl(kernels::active(), c, z.data(), head);
}

double objective_value(const Problem& p, std::span<const double> z) {
  double v = p.linear.empty() ? 0.0 : dot(p.linear, z);
  for (const KlTerm& k : p.kl) v += kl_value(k, z[k.mean_idx], z[k.std_idx]);
  return v;
}

Result minimize(const Problem& p, Vector z0, const Options& opts,
                const std::function<bool(std::span<const double>)>& early_exit) {
  if (z0.size() != p.size()) throw DimensionError("barrier::minimize: start point size");
  const auto& kt = kernels::active();
  for (const Cone& c : p.cones)
    if (!(cone_value_impl(kt, c, z0.data(), p.head) < 0.0))
      throw std::invalid_argument("barrier::minimize: start point is not strictly feasible");
  if (!std::isfinite(objective_value(p, z0)))
    throw std::invalid_argument("barrier::minimize: objective undefined at the start point");

  Result res;
  res.z = std::move(z0);
  Workspace ws(p);
  const double ncons = static_cast<double>(std::max<std::size_t>(p.cones.size(), 1));
  double t = 1.0 / opts.mu0;
  auto stop = [&](bool converged) {
    res.converged = converged;
    res.gap = ncons / t;
    res.objective = objective_value(p, res.z);
    return res;
  };

  for (;;) {
    const bool last = ncons / t <= opts.gap_tol;
    const double tol = last ? opts.newton_tol : std::max(opts.newton_tol, opts.center_tol);
    // Centering.
    double prev_dec = std::numeric_limits<double>::infinity();
    for (;;) {
      if (res.newton_iters >= opts.max_newton_iter) return stop(false);
      if (!ws.assemble(t, res.z) || !ws.solve()) return stop(false);
      const double slope = dot(ws.grad(), ws.step());
      const double dec = -slope * 0.5;
      if (!(slope < 0.0) || dec <= tol) break;
      // Inside the quadratic region the decrement must shrink fast; when it
      // stalls the remaining error is rounding noise.
      if (dec <= opts.center_tol && dec > 0.25 * prev_dec) break;
      prev_dec = dec;

      ws.prepare_line(res.z);
      double alpha = std::min(1.0, 0.99 * ws.alpha_max());
      bool moved = false;
      while (alpha > 1e-14) {
        if (ws.merit_delta(t, res.z, alpha) <= 0.25 * alpha * slope) {
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      ++res.newton_iters;
      // A vanishing step means the centering has hit rounding noise.
      if (!moved || alpha < 1e-10) break;
      bool changed = false;
      for (std::size_t j = 0; j < res.z.size(); ++j) {
        const double next = res.z[j] + alpha * ws.step()[j];
        changed |= next != res.z[j];
        res.z[j] = next;
      }
      if (!changed) break;
      if (early_exit && early_exit(res.z)) {
        res.early_exit = true;
        return stop(false);
      }
    }
    if (last) return stop(true);
    t *= opts.mu_factor;
  }
}

}  // namespace sgpg::barrier
