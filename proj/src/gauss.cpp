#include "sgpg/gauss.hpp"

#include <cmath>
#include <stdexcept>

namespace sgpg {

double kl_diag_gauss(const GaussDist& q, const GaussDist& p) {
  if (q.mean.size() != p.mean.size() || q.std.size() != q.mean.size() ||
      p.std.size() != p.mean.size())
    throw DimensionError("kl_diag_gauss: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.mean.size(); ++i) {
    if (!(q.std[i] > 0.0) || !(p.std[i] > 0.0))
      throw std::domain_error("kl_diag_gauss: standard deviations must be positive");
    const double d = p.mean[i] - q.mean[i];
    const double p2 = p.std[i] * p.std[i];
    kl += std::log(p.std[i] / q.std[i]) + (q.std[i] * q.std[i] + d * d) / (2.0 * p2) - 0.5;
  }
  return kl;
}

}  // namespace sgpg
