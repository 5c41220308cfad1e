#pragma once

// Dense double-precision inner loops used by the barrier solver and the MLP.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The active table is picked once at startup from CPUID and
// can be overridden with SGPG_SIMD=scalar|avx2 or force_isa().

#include <cstddef>
#include <span>
#include <string_view>

namespace sgpg::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // Lower triangle of the row-major n x n block at `a`:
  // a[i*lda + j] += alpha * x[i] * x[j] for j <= i.
  void (*syr_lower)(double alpha, const double* x, double* a, std::size_t n,
                    std::size_t lda);
  // Batched syr over the k rows of X (row stride ldx):
  // a[i*lda + j] += sum_r alpha[r] * X[r][i] * X[r][j] for j <= i < n.
  void (*syrk_lower)(const double* x, std::size_t k, std::size_t ldx, const double* alpha,
                     double* a, std::size_t n, std::size_t lda);
  // y += A x, A row-major rows x cols with leading dimension lda.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
               std::size_t lda, const double* x, double* y);
  // y += A^T x
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols,
                 std::size_t lda, const double* x, double* y);
  // A += alpha * x y^T
  void (*ger)(double alpha, const double* x, std::size_t rows, const double* y,
              std::size_t cols, double* a, std::size_t lda);
};

const KernelTable& table(Isa isa);
const KernelTable& active();
Isa active_isa();
Isa detected_isa();
bool isa_available(Isa isa);
// Returns false when the requested ISA is not supported by this CPU/build.
bool force_isa(Isa isa);
std::string_view isa_name(Isa isa);

// Span front-ends over the active table.
inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace sgpg::kernels
