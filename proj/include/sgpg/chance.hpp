#pragma once

// Gaussian chance constraints over polytopes, reformulated as second-order
// cone constraints via a union bound over the rows.

#include <random>
#include <vector>

#include "sgpg/linalg.hpp"
#include "sgpg/polytope.hpp"

namespace sgpg {

double normal_cdf(double x);
// Inverse standard normal CDF, absolute error <= 1e-9 on (0, 1).
double gaussian_quantile(double p);
double split_epsilon(double eps, std::size_t rows);

// h - g^T z >= c * ||F z||_2, with c >= 0.
struct SocConstraint {
  Vector g;
  double h = 0.0;
  double c = 0.0;
  Matrix F;  // k x N; may have zero rows for a plain linear constraint

  double margin(std::span<const double> z) const;  // h - g^T z - c ||F z||
};

// mu(z) = M z + offset
struct MeanMap {
  Matrix M;
  Vector offset;
};

// Sigma_bar(z) = sum_j z_j G_j over the listed (index, n x k) terms.
struct CovFactorMap {
  std::size_t factor_cols = 0;
  std::vector<std::pair<std::size_t, Matrix>> terms;
};

// One cone per row of p, each with violation budget eps / rows.
std::vector<SocConstraint> reformulate(const Polytope& p, const MeanMap& mean,
                                       const CovFactorMap& cov, double eps);

// Fraction of samples x ~ N(mu, Sigma_bar Sigma_bar^T) falling outside p.
double empirical_violation(const Polytope& p, std::span<const double> mu,
                           const Matrix& sigma_bar, std::size_t n_samples,
                           std::mt19937_64& rng);

}  // namespace sgpg
