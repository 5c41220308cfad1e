#include "sgpg/chance.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sgpg {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gaussian_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("gaussian_quantile: p must lie in (0, 1)");

  // Acklam's rational approximation (relative error ~1.15e-9) ...
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  constexpr double p_high = 1.0 - p_low;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= p_high) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // ... polished with Halley steps on Phi. The residual is taken on the
  // smaller tail so it stays accurate for p near 1.
  for (int it = 0; it < 2; ++it) {
    const double e = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double split_epsilon(double eps, std::size_t rows) {
  if (!(eps > 0.0)) throw std::domain_error("split_epsilon: eps must be positive");
  if (rows == 0) throw std::domain_error("split_epsilon: need at least one row");
  return eps / static_cast<double>(rows);
}

double SocConstraint::margin(std::span<const double> z) const {
  double lin = h - dot(g, z);
  if (c != 0.0 && F.rows() > 0) lin -= c * norm2(F * z);
  return lin;
}

std::vector<SocConstraint> reformulate(const Polytope& p, const MeanMap& mean,
                                       const CovFactorMap& cov, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("reformulate: eps must lie in (0, 1)");
  if (mean.M.rows() != p.dim() || mean.offset.size() != p.dim())
    throw DimensionError("reformulate: mean map does not match polytope dimension");
  const std::size_t nvars = mean.M.cols();
  const double coeff = gaussian_quantile(1.0 - split_epsilon(eps, p.rows()));

  std::vector<SocConstraint> out;
  out.reserve(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto u = p.U().row(i);
    SocConstraint con;
    con.g = transpose_times(mean.M, u);
    con.h = p.v()[i] - dot(u, mean.offset);
    con.c = coeff;
    // Column j of F is G_j^T u, i.e. the direction Sigma_bar^T u_i.
    con.F = Matrix(cov.factor_cols, nvars);
    for (const auto& [j, gj] : cov.terms) {
      if (j >= nvars || gj.rows() != p.dim() || gj.cols() != cov.factor_cols)
        throw DimensionError("reformulate: covariance term shape mismatch");
      const Vector col = transpose_times(gj, u);
      for (std::size_t k = 0; k < cov.factor_cols; ++k) con.F(k, j) += col[k];
    }
    out.push_back(std::move(con));
  }
  return out;
}

double empirical_violation(const Polytope& p, std::span<const double> mu,
                           const Matrix& sigma_bar, std::size_t n_samples,
                           std::mt19937_64& rng) {
  if (n_samples == 0) throw std::domain_error("empirical_violation: n_samples must be >= 1");
  if (mu.size() != p.dim() || sigma_bar.rows() != p.dim())
    throw DimensionError("empirical_violation: dimension mismatch");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(sigma_bar.cols());
  std::size_t outside = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (double& e : xi) e = normal(rng);
    Vector x = sigma_bar * xi;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += mu[i];
    if (!contains(p, x, 0.0)) ++outside;
  }
  return static_cast<double>(outside) / static_cast<double>(n_samples);
}

}  // namespace sgpg
