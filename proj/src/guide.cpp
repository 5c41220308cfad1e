#include "sgpg/guide.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgpg/lp.hpp"

namespace sgpg {

namespace {

constexpr double kInteriorPull = 0.95;
constexpr double kPhase1Exit = 1e-6;

// Dense constraint over `nvars` variables: linear part g, plus c ||w o sigma||
// where sigma occupies the first m variables.
SocConstraint make_constraint(std::size_t nvars, std::size_t m, Vector g, double h, double c,
                              std::span<const double> w) {
  SocConstraint con;
  con.g = std::move(g);
  con.h = h;
  std::size_t nz = 0;
  for (double wi : w) nz += wi != 0.0;
  if (c == 0.0 || nz == 0) return con;
  if (m == 1) {
    // ||w sigma|| = |w| sigma because sigma > 0.
    con.g[0] += c * std::abs(w[0]);
    return con;
  }
  con.c = c;
  con.F = Matrix(nz, nvars);
  std::size_t r = 0;
  for (std::size_t j = 0; j < m; ++j)
    if (w[j] != 0.0) con.F(r++, j) = w[j];
  return con;
}

SocConstraint expand(const barrier::Cone& c, std::size_t nvars) {
  SocConstraint con;
  con.g.assign(nvars, 0.0);
  for (std::size_t j = c.begin; j < c.end; ++j) con.g[j] = c.g[j - c.begin];
  con.h = c.h;
  con.c = c.c;
  if (c.c != 0.0) {
    con.F = Matrix(c.F.rows(), nvars);
    for (std::size_t i = 0; i < c.F.rows(); ++i)
      for (std::size_t j = 0; j < c.F.cols(); ++j) con.F(i, c.f_begin + j) = c.F(i, j);
  }
  return con;
}

bool is_axis_box(const Polytope& p, Vector& lo, Vector& hi) {
  const std::size_t m = p.dim();
  lo.assign(m, -std::numeric_limits<double>::infinity());
  hi.assign(m, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    std::size_t idx = m;
    for (std::size_t j = 0; j < m; ++j) {
      if (p.U()(i, j) != 0.0) {
        if (idx != m) return false;
        idx = j;
      }
    }
    if (idx == m) return false;
    const double bound = p.v()[i] / p.U()(i, idx);
    if (p.U()(i, idx) > 0.0)
      hi[idx] = std::min(hi[idx], bound);
    else
      lo[idx] = std::max(lo[idx], bound);
  }
  for (std::size_t j = 0; j < m; ++j)
    if (!std::isfinite(lo[j]) || !std::isfinite(hi[j])) return false;
  return true;
}

// Chebyshev center: maximize r subject to u_i^T x + ||u_i|| r <= v_i.
Vector chebyshev_center(const Polytope& p) {
  const std::size_t m = p.dim();
  Matrix a(p.rows(), m + 1);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < m; ++j) a(i, j) = p.U()(i, j);
    a(i, m) = norm2(p.U().row(i));
  }
  Vector c(m + 1, 0.0);
  c[m] = -1.0;
  const LpResult res = solve_lp(c, a, p.v());
  if (res.status != LpStatus::optimal || !(res.x[m] > 0.0))
    throw GuideError("action box has an empty interior");
  return Vector(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(m));
}

}  // namespace

const char* to_string(GuideStatus s) {
  switch (s) {
    case GuideStatus::optimal: return "optimal";
    case GuideStatus::relaxed: return "relaxed";
    case GuideStatus::failed: return "failed";
  }
  return "unknown";
}

SafetyGuide::SafetyGuide(LinearSystem sys, GuideConfig cfg)
    : sys_(std::move(sys)), cfg_(std::move(cfg)), n_(sys_.state_dim()), m_(sys_.action_dim()) {
  const unsigned H = cfg_.horizon;
  if (H < 1 || H > 512) throw GuideError("guide: horizon must lie in [1, 512]");
  if (!(cfg_.eps > 0.0 && cfg_.eps < 1.0)) throw GuideError("guide: eps must lie in (0, 1)");
  if (!(cfg_.slack_weight > 0.0)) throw GuideError("guide: slack_weight must be positive");
  if (!(cfg_.sigma_floor > 0.0)) throw GuideError("guide: sigma_floor must be positive");
  if (!(cfg_.kkt_tol > 0.0)) throw GuideError("guide: kkt_tol must be positive");
  if (cfg_.max_newton_iter < 1) throw GuideError("guide: max_newton_iter must be >= 1");
  if (!(cfg_.mu0 > 0.0) || !(cfg_.mu_factor > 1.0))
    throw GuideError("guide: barrier schedule needs mu0 > 0 and mu_factor > 1");
  if (cfg_.safe.dim() != n_ || cfg_.terminal.dim() != n_)
    throw GuideError("guide: safe sets must live in the state space");
  if (cfg_.action_box.dim() != m_) throw GuideError("guide: action box must live in the action space");
  if (cfg_.safe.rows() == 0 || cfg_.terminal.rows() == 0 || cfg_.action_box.rows() == 0)
    throw GuideError("guide: safe sets and action box need at least one row");
  if (is_empty(cfg_.terminal)) throw GuideError("guide: terminal set is empty");
  if (!is_subset(cfg_.terminal, cfg_.safe)) throw GuideError("guide: terminal set is not inside the safe set");
  if (!is_bounded(cfg_.action_box)) throw GuideError("guide: action box must be bounded");

  center_ = chebyshev_center(cfg_.action_box);
  Vector lo, hi;
  if (is_axis_box(cfg_.action_box, lo, hi)) box_ = std::make_pair(lo, hi);

  const std::size_t N = num_vars();
  const PowerCache pc(sys_, H);

  // State cones, step by step.
  for (unsigned t = 1; t <= H; ++t) {
    const Polytope& set = t < H ? cfg_.safe : cfg_.terminal;
    const double c = gaussian_quantile(1.0 - split_epsilon(cfg_.eps, set.rows()));
    for (std::size_t i = 0; i < set.rows(); ++i) {
      const auto u = set.U().row(i);
      Vector g(N, 0.0);
      for (unsigned k = 0; k < t; ++k) {
        const Vector coef = transpose_times(pc.input_response(t - 1 - k), u);
        for (std::size_t j = 0; j < m_; ++j) g[m_ * (k + 1) + j] = coef[j];
      }
      const Vector w = transpose_times(pc.input_response(t - 1), u);
      const SocConstraint con = make_constraint(N, m_, std::move(g), set.v()[i], c, w);
      state_cones_.push_back({barrier::compact(con, N), transpose_times(pc.power(t), u)});
    }
  }

  // Chance-tightened box on the stochastic first action, then the std floor.
  const Polytope& box = cfg_.action_box;
  const double ca = gaussian_quantile(1.0 - split_epsilon(cfg_.eps, box.rows()));
  for (std::size_t i = 0; i < box.rows(); ++i) {
    const auto u = box.U().row(i);
    Vector g(N, 0.0);
    for (std::size_t j = 0; j < m_; ++j) g[m_ + j] = u[j];
    fixed_cones_.push_back(barrier::compact(make_constraint(N, m_, std::move(g), box.v()[i], ca, u), N));
  }
  for (std::size_t j = 0; j < m_; ++j) {
    Vector g(N, 0.0);
    g[j] = -1.0;
    fixed_cones_.push_back(barrier::compact(make_constraint(N, m_, std::move(g), -cfg_.sigma_floor, 0.0, {}), N));
  }
  first_action_cones_ = fixed_cones_.size();
  for (unsigned k = 1; k < H; ++k) {
    for (std::size_t i = 0; i < box.rows(); ++i) {
      Vector g(N, 0.0);
      for (std::size_t j = 0; j < m_; ++j) g[m_ * (k + 1) + j] = box.U()(i, j);
      fixed_cones_.push_back(barrier::compact(make_constraint(N, m_, std::move(g), box.v()[i], 0.0, {}), N));
    }
  }

  try {
    lqr_ = lqr_gain(sys_, Matrix::identity(n_), Matrix::identity(m_));
  } catch (const std::runtime_error&) {
    lqr_ = Matrix(m_, n_);  // no stabilizing feedback; candidates just hold the center
  }
}

std::vector<barrier::Cone> SafetyGuide::instantiate(std::span<const double> state) const {
  std::vector<barrier::Cone> cones;
  cones.reserve(state_cones_.size() + fixed_cones_.size());
  for (const StateCone& sc : state_cones_) {
    cones.push_back(sc.cone);
    cones.back().h -= dot(sc.state_coef, state);
  }
  cones.insert(cones.end(), fixed_cones_.begin(), fixed_cones_.end());
  return cones;
}

Vector SafetyGuide::candidate(std::span<const double> state, std::span<const double> a0,
                              std::span<const double> sigma0, bool interior) const {
  auto admissible = [&](Vector a) {
    if (box_) {
      for (std::size_t j = 0; j < m_; ++j) a[j] = std::clamp(a[j], box_->first[j], box_->second[j]);
    } else if (!contains(cfg_.action_box, a)) {
      a = center_;
    }
    if (interior)
      for (std::size_t j = 0; j < m_; ++j) a[j] = center_[j] + kInteriorPull * (a[j] - center_[j]);
    return a;
  };
  Vector z(num_vars(), 0.0);
  std::copy(sigma0.begin(), sigma0.end(), z.begin());
  Vector a = admissible(Vector(a0.begin(), a0.end()));
  std::copy(a.begin(), a.end(), z.begin() + static_cast<std::ptrdiff_t>(m_));
  Vector x = step_mean(sys_, state, a);
  for (unsigned k = 1; k < cfg_.horizon; ++k) {
    a = admissible(scaled(-1.0, lqr_ * x));
    std::copy(a.begin(), a.end(), z.begin() + static_cast<std::ptrdiff_t>(m_ * (k + 1)));
    x = step_mean(sys_, x, a);
  }
  return z;
}

bool SafetyGuide::identity_feasible(std::span<const double> state, const GaussDist& base,
                                    const std::vector<barrier::Cone>& cones) const {
  (void)state;
  const std::size_t N = num_vars();
  const std::size_t lead = 2 * m_;
  Vector z(N, 0.0);
  std::copy(base.std.begin(), base.std.end(), z.begin());
  std::copy(base.mean.begin(), base.mean.end(), z.begin() + static_cast<std::ptrdiff_t>(m_));
  const std::size_t nstate = state_cones_.size();
  for (std::size_t i = 0; i < first_action_cones_; ++i)
    if (barrier::cone_value(cones[nstate + i], z, N) > 0.0) return false;
  if (N == lead) {
    for (std::size_t i = 0; i < nstate; ++i)
      if (barrier::cone_value(cones[i], z, N) > 0.0) return false;
    return true;
  }

  // With the first action fixed every remaining constraint is linear in the
  // future actions.
  const std::size_t nf = N - lead;
  Matrix a(0, nf);
  Vector b;
  Vector row(nf);
  for (std::size_t i = 0; i < cones.size(); ++i) {
    if (i >= nstate && i < nstate + first_action_cones_) continue;
    const barrier::Cone& c = cones[i];
    double fixed = -c.h;
    if (c.c != 0.0) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < c.F.rows(); ++k) {
        double q = 0.0;
        for (std::size_t j = 0; j < c.F.cols(); ++j) q += c.F(k, j) * z[c.f_begin + j];
        r2 += q * q;
      }
      fixed += c.c * std::sqrt(r2);
    }
    std::fill(row.begin(), row.end(), 0.0);
    bool any = false;
    for (std::size_t j = c.begin; j < c.end; ++j) {
      const double gj = c.g[j - c.begin];
      if (j < lead) {
        fixed += gj * z[j];
      } else if (gj != 0.0) {
        row[j - lead] = gj;
        any = true;
      }
    }
    if (!any) {
      if (fixed > 0.0) return false;
      continue;
    }
    a.append_row(row);
    b.push_back(-fixed);
  }
  if (a.rows() == 0) return true;
  return lp_feasible(a, b);
}

barrier::Options SafetyGuide::solver_options() const {
  barrier::Options o;
  o.mu0 = cfg_.mu0;
  o.mu_factor = cfg_.mu_factor;
  o.gap_tol = cfg_.kkt_tol;
  o.max_newton_iter = cfg_.max_newton_iter;
  return o;
}

GuideResult SafetyGuide::finish(std::span<const double> state, const GaussDist& base,
                                std::span<const double> z, GuideStatus status, int iters) const {
  GuideResult res;
  res.status = status;
  res.newton_iters = iters;
  res.safe.std.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(m_));
  res.safe.mean.assign(z.begin() + static_cast<std::ptrdiff_t>(m_),
                       z.begin() + static_cast<std::ptrdiff_t>(2 * m_));
  res.kl = kl_diag_gauss(res.safe, base);
  res.plan_states.emplace_back(state.begin(), state.end());
  for (unsigned k = 0; k < cfg_.horizon; ++k) {
    const auto first = z.begin() + static_cast<std::ptrdiff_t>(m_ * (k + 1));
    res.plan_actions.emplace_back(first, first + static_cast<std::ptrdiff_t>(m_));
    res.plan_states.push_back(step_mean(sys_, res.plan_states.back(), res.plan_actions.back()));
  }
  return res;
}

GuideResult SafetyGuide::fallback(std::span<const double> state, const GaussDist& base,
                                  int iters) const {
  const Vector floor(m_, cfg_.sigma_floor);
  const Vector z = candidate(state, base.mean, floor, false);
  return finish(state, base, z, GuideStatus::failed, iters);
}

GuideResult SafetyGuide::solve(std::span<const double> state, const GaussDist& base) const {
  if (state.size() != n_) throw DimensionError("guide: state dimension mismatch");
  if (base.mean.size() != m_ || base.std.size() != m_)
    throw DimensionError("guide: base distribution dimension mismatch");
  for (std::size_t j = 0; j < m_; ++j)
    if (!(base.std[j] > 0.0) || !std::isfinite(base.mean[j]))
      throw std::domain_error("guide: base distribution needs finite mean and positive std");
  if (!all_finite(state)) throw std::domain_error("guide: non-finite state");

  const std::size_t N = num_vars();
  std::vector<barrier::Cone> cones = instantiate(state);
  auto worst = [&](std::span<const double> z) {
    double w = -std::numeric_limits<double>::infinity();
    for (const barrier::Cone& c : cones) w = std::max(w, barrier::cone_value(c, z, N));
    return w;
  };

  // The base distribution itself, with a feedback continuation.
  {
    const Vector z = candidate(state, base.mean, base.std, false);
    bool identity = worst(z) <= 0.0;
    if (!identity) identity = identity_feasible(state, base, cones);
    if (identity) {
      GuideResult res = finish(state, base, z, GuideStatus::optimal, 0);
      res.safe = base;
      res.kl = 0.0;
      res.identity = true;
      return res;
    }
  }

  const barrier::Options opts = solver_options();
  int iters = 0;

  // Strictly feasible start for the KL phase.
  std::optional<Vector> start;
  const Vector floor2(m_, 2.0 * cfg_.sigma_floor);
  Vector half_std = scaled(0.5, base.std);
  for (double& s : half_std) s = std::max(s, 2.0 * cfg_.sigma_floor);
  const Vector feedback = scaled(-1.0, lqr_ * state);
  const Vector tries[] = {candidate(state, base.mean, half_std, true),
                          candidate(state, base.mean, floor2, true),
                          candidate(state, feedback, floor2, true)};
  for (const Vector& z : tries) {
    if (worst(z) < 0.0) {
      start = z;
      break;
    }
  }

  if (!start) {
    // Phase 1: minimize a common slack s over all constraints.
    barrier::Problem p1;
    p1.head = N;
    p1.tail = 1;
    p1.linear.assign(N + 1, 0.0);
    p1.linear[N] = 1.0;
    p1.cones = cones;
    for (barrier::Cone& c : p1.cones) {
      c.tail = 0;
      c.tail_coef = -1.0;
    }
    Vector z0 = tries[2];
    z0.push_back(std::max(worst(tries[2]), 0.0) + 1.0);
    try {
      const barrier::Result r1 = barrier::minimize(
          p1, std::move(z0), opts, [N](std::span<const double> z) { return z[N] < -kPhase1Exit; });
      iters += r1.newton_iters;
      if (r1.z[N] < 0.0) {
        Vector z(r1.z.begin(), r1.z.begin() + static_cast<std::ptrdiff_t>(N));
        if (worst(z) < 0.0) start = std::move(z);
      }
    } catch (const std::invalid_argument&) {
    }
  }

  if (start) {
    barrier::Problem p2;
    p2.head = N;
    p2.cones = cones;
    for (std::size_t j = 0; j < m_; ++j)
      p2.kl.push_back({m_ + j, j, base.mean[j], base.std[j]});
    const barrier::Result r2 = barrier::minimize(p2, std::move(*start), opts);
    iters += r2.newton_iters;
    if (r2.converged) return finish(state, base, r2.z, GuideStatus::optimal, iters);
    return fallback(state, base, iters);
  }

  // No strictly feasible plan: penalized slack on every state cone.
  const std::size_t K = state_cones_.size();
  barrier::Problem pr;
  pr.head = N;
  pr.tail = K;
  pr.linear.assign(N + K, 0.0);
  for (std::size_t k = 0; k < K; ++k) pr.linear[N + k] = cfg_.slack_weight;
  for (std::size_t j = 0; j < m_; ++j) pr.kl.push_back({m_ + j, j, base.mean[j], base.std[j]});
  pr.cones.reserve(cones.size() + K);
  for (std::size_t k = 0; k < cones.size(); ++k) {
    pr.cones.push_back(cones[k]);
    if (k < K) {
      pr.cones.back().tail = k;
      pr.cones.back().tail_coef = -1.0;
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    barrier::Cone nonneg;
    nonneg.tail = k;
    nonneg.tail_coef = -1.0;
    pr.cones.push_back(std::move(nonneg));
  }
  Vector z0 = tries[2];
  for (std::size_t i = K; i < cones.size(); ++i)
    if (barrier::cone_value(cones[i], z0, N) >= 0.0) return fallback(state, base, iters);
  for (std::size_t k = 0; k < K; ++k)
    z0.push_back(std::max(barrier::cone_value(cones[k], z0, N), 0.0) + 1.0);
  const barrier::Result rr = barrier::minimize(pr, std::move(z0), opts);
  iters += rr.newton_iters;
  if (!rr.converged) return fallback(state, base, iters);
  GuideResult res = finish(state, base, rr.z, GuideStatus::relaxed, iters);
  for (std::size_t k = 0; k < K; ++k) res.slack_total += rr.z[N + k];
  return res;
}

std::vector<SocConstraint> SafetyGuide::constraints(std::span<const double> state) const {
  std::vector<SocConstraint> out;
  for (const barrier::Cone& c : instantiate(state)) out.push_back(expand(c, num_vars()));
  return out;
}

double SafetyGuide::max_violation(std::span<const double> state, std::span<const double> z) const {
  if (z.size() != num_vars()) throw DimensionError("guide: decision vector size mismatch");
  double w = -std::numeric_limits<double>::infinity();
  for (const barrier::Cone& c : instantiate(state)) w = std::max(w, barrier::cone_value(c, z, num_vars()));
  return w;
}

GuideResult solve_guide(const GuideConfig& cfg, const LinearSystem& sys,
                        std::span<const double> state, const GaussDist& base) {
  return SafetyGuide(sys, cfg).solve(state, base);
}

}  // namespace sgpg
