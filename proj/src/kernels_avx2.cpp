// Compiled with -mavx2 -mfma; only reached through the dispatch table after a
// CPUID check.
#include <immintrin.h>

#include "kernels_impl.hpp"

namespace sgpg::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void syr_lower_avx2(double alpha, const double* x, double* a, std::size_t n,
                    std::size_t lda) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = alpha * x[i];
    if (s == 0.0) continue;
    axpy_avx2(s, x, a + i * lda, i + 1);
  }
}

void syrk_lower_avx2(const double* x, std::size_t k, std::size_t ldx, const double* alpha,
                     double* a, std::size_t n, std::size_t lda) {
  constexpr std::size_t kChunk = 8;
  double s[kChunk];
  for (std::size_t r0 = 0; r0 < k; r0 += kChunk) {
    const std::size_t kk = k - r0 < kChunk ? k - r0 : kChunk;
    const double* xs = x + r0 * ldx;
    for (std::size_t i = 0; i < n; ++i) {
      bool any = false;
      for (std::size_t r = 0; r < kk; ++r) {
        s[r] = alpha[r0 + r] * xs[r * ldx + i];
        any |= s[r] != 0.0;
      }
      if (!any) continue;
      double* row = a + i * lda;
      std::size_t j = 0;
      // Each 4-wide slice of the row is loaded and stored once per chunk.
      for (; j + 4 <= i + 1; j += 4) {
        __m256d acc = _mm256_loadu_pd(row + j);
        for (std::size_t r = 0; r < kk; ++r)
          acc = _mm256_fmadd_pd(_mm256_set1_pd(s[r]), _mm256_loadu_pd(xs + r * ldx + j), acc);
        _mm256_storeu_pd(row + j, acc);
      }
      for (; j <= i; ++j) {
        double acc = row[j];
        for (std::size_t r = 0; r < kk; ++r) acc += s[r] * xs[r * ldx + j];
        row[j] = acc;
      }
    }
  }
}

void gemv_avx2(const double* a, std::size_t rows, std::size_t cols,
               std::size_t lda, const double* x, double* y) {
  std::size_t i = 0;
  // Four rows at a time share the loads of x.
  for (; i + 4 <= rows; i += 4) {
    const double* r0 = a + i * lda;
    const double* r1 = r0 + lda;
    const double* r2 = r1 + lda;
    const double* r3 = r2 + lda;
    __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
    __m256d c2 = _mm256_setzero_pd(), c3 = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d xv = _mm256_loadu_pd(x + j);
      c0 = _mm256_fmadd_pd(_mm256_loadu_pd(r0 + j), xv, c0);
      c1 = _mm256_fmadd_pd(_mm256_loadu_pd(r1 + j), xv, c1);
      c2 = _mm256_fmadd_pd(_mm256_loadu_pd(r2 + j), xv, c2);
      c3 = _mm256_fmadd_pd(_mm256_loadu_pd(r3 + j), xv, c3);
    }
    double s0 = hsum(c0), s1 = hsum(c1), s2 = hsum(c2), s3 = hsum(c3);
    for (; j < cols; ++j) {
      s0 += r0[j] * x[j];
      s1 += r1[j] * x[j];
      s2 += r2[j] * x[j];
      s3 += r3[j] * x[j];
    }
    y[i] += s0;
    y[i + 1] += s1;
    y[i + 2] += s2;
    y[i + 3] += s3;
  }
  for (; i < rows; ++i) y[i] += dot_avx2(a + i * lda, x, cols);
}

void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols,
                 std::size_t lda, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) {
    if (x[i] != 0.0) axpy_avx2(x[i], a + i * lda, y, cols);
  }
}

void ger_avx2(double alpha, const double* x, std::size_t rows, const double* y,
              std::size_t cols, double* a, std::size_t lda) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double s = alpha * x[i];
    if (s != 0.0) axpy_avx2(s, y, a + i * lda, cols);
  }
}

}  // namespace

const KernelTable kAvx2Table{dot_avx2,  axpy_avx2,   syr_lower_avx2, syrk_lower_avx2,
                             gemv_avx2, gemv_t_avx2, ger_avx2};

}  // namespace sgpg::kernels::detail
