#include "kernels_impl.hpp"

namespace sgpg::kernels::detail {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void syr_lower_scalar(double alpha, const double* x, double* a, std::size_t n,
                      std::size_t lda) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = alpha * x[i];
    if (s == 0.0) continue;
    double* row = a + i * lda;
    for (std::size_t j = 0; j <= i; ++j) row[j] += s * x[j];
  }
}

void syrk_lower_scalar(const double* x, std::size_t k, std::size_t ldx, const double* alpha,
                       double* a, std::size_t n, std::size_t lda) {
  for (std::size_t r = 0; r < k; ++r) syr_lower_scalar(alpha[r], x + r * ldx, a, n, lda);
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols,
                 std::size_t lda, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] += dot_scalar(a + i * lda, x, cols);
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols,
                   std::size_t lda, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) {
    if (x[i] != 0.0) axpy_scalar(x[i], a + i * lda, y, cols);
  }
}

void ger_scalar(double alpha, const double* x, std::size_t rows, const double* y,
                std::size_t cols, double* a, std::size_t lda) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double s = alpha * x[i];
    if (s != 0.0) axpy_scalar(s, y, a + i * lda, cols);
  }
}

}  // namespace

const KernelTable kScalarTable{dot_scalar,  axpy_scalar,   syr_lower_scalar, syrk_lower_scalar,
                               gemv_scalar, gemv_t_scalar, ger_scalar};

}  // namespace sgpg::kernels::detail
