#pragma once

#include "sgpg/linalg.hpp"

namespace sgpg {

// Gaussian with diagonal covariance, parameterized by per-dimension std.
struct GaussDist {
  Vector mean;
  Vector std;

  std::size_t dim() const { return mean.size(); }
};

// KL(q || p) for diagonal Gaussians.
double kl_diag_gauss(const GaussDist& q, const GaussDist& p);

}  // namespace sgpg
