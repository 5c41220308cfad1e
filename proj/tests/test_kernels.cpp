#include <doctest.h>

#include <random>
#include <vector>

#include "sgpg/kernels.hpp"

using namespace sgpg;
using kernels::Isa;

namespace {

std::vector<double> randvec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Accumulation order differs between variants, so compare with a relative
// bound scaled by the magnitude of the summed terms.
void close(const std::vector<double>& a, const std::vector<double>& b, double scale) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * (1.0 + scale));
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(kernels::isa_available(Isa::scalar));
  CHECK(kernels::isa_name(Isa::scalar) == "scalar");
}

TEST_CASE("scalar kernels match naive loops") {
  const auto& k = kernels::table(Isa::scalar);
  const std::vector<double> x{1, 2, 3}, y{4, 5, 6};
  CHECK(k.dot(x.data(), y.data(), 3) == 32.0);
  std::vector<double> z = y;
  k.axpy(2.0, x.data(), z.data(), 3);
  CHECK(z == std::vector<double>{6, 9, 12});

  // A = [[1,2],[3,4],[5,6]]
  const std::vector<double> a{1, 2, 3, 4, 5, 6};
  std::vector<double> out(3, 1.0);
  k.gemv(a.data(), 3, 2, 2, std::vector<double>{1, -1}.data(), out.data());
  CHECK(out == std::vector<double>{0, 0, 0});
  std::vector<double> outt(2, 0.0);
  k.gemv_t(a.data(), 3, 2, 2, std::vector<double>{1, 1, 1}.data(), outt.data());
  CHECK(outt == std::vector<double>{9, 12});

  std::vector<double> g(6, 0.0);
  k.ger(1.0, std::vector<double>{1, 2, 3}.data(), 3, std::vector<double>{1, 10}.data(), 2, g.data(), 2);
  CHECK(g == std::vector<double>{1, 10, 2, 20, 3, 30});

  std::vector<double> s(4, 0.0);
  k.syr_lower(2.0, std::vector<double>{1, 3}.data(), s.data(), 2, 2);
  CHECK(s[0] == 2.0);
  CHECK(s[2] == 6.0);
  CHECK(s[3] == 18.0);
  CHECK(s[1] == 0.0);  // upper triangle untouched
}

TEST_CASE("syrk_lower equals a sum of syr_lower") {
  const auto& k = kernels::table(Isa::scalar);
  std::mt19937_64 rng(5);
  const std::size_t n = 7, rows = 5, ldx = 9, lda = 8;
  const auto x = randvec(rng, rows * ldx);
  const auto alpha = randvec(rng, rows);
  std::vector<double> a1(n * lda, 0.0), a2(n * lda, 0.0);
  k.syrk_lower(x.data(), rows, ldx, alpha.data(), a1.data(), n, lda);
  for (std::size_t r = 0; r < rows; ++r) k.syr_lower(alpha[r], x.data() + r * ldx, a2.data(), n, lda);
  close(a1, a2, 10.0);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!kernels::isa_available(Isa::avx2)) {
    MESSAGE("AVX2 not available on this CPU/build; equivalence test skipped");
    return;
  }
  const auto& s = kernels::table(Isa::scalar);
  const auto& v = kernels::table(Isa::avx2);
  std::mt19937_64 rng(11);
  // Odd sizes exercise the remainder loops.
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 13u, 64u, 67u}) {
    CAPTURE(n);
    const auto x = randvec(rng, n), y = randvec(rng, n);
    CHECK(std::abs(s.dot(x.data(), y.data(), n) - v.dot(x.data(), y.data(), n)) <= 1e-12 * (1.0 + n));

    auto y1 = y, y2 = y;
    s.axpy(0.7, x.data(), y1.data(), n);
    v.axpy(0.7, x.data(), y2.data(), n);
    close(y1, y2, 1.0);

    const std::size_t rows = n / 2 + 1, lda = n + 3;
    const auto a = randvec(rng, rows * lda);
    const auto xr = randvec(rng, rows);
    std::vector<double> g1(rows, 0.5), g2(rows, 0.5);
    s.gemv(a.data(), rows, n, lda, x.data(), g1.data());
    v.gemv(a.data(), rows, n, lda, x.data(), g2.data());
    close(g1, g2, static_cast<double>(n));

    std::vector<double> t1(n, -0.25), t2(n, -0.25);
    s.gemv_t(a.data(), rows, n, lda, xr.data(), t1.data());
    v.gemv_t(a.data(), rows, n, lda, xr.data(), t2.data());
    close(t1, t2, static_cast<double>(rows));

    auto r1 = a, r2 = a;
    s.ger(1.3, xr.data(), rows, x.data(), n, r1.data(), lda);
    v.ger(1.3, xr.data(), rows, x.data(), n, r2.data(), lda);
    close(r1, r2, 1.0);

    const std::size_t ld = n + 2;
    std::vector<double> q1(n * ld + 1, 0.1), q2(n * ld + 1, 0.1);
    s.syr_lower(-0.4, x.data(), q1.data(), n, ld);
    v.syr_lower(-0.4, x.data(), q2.data(), n, ld);
    close(q1, q2, 1.0);

    const std::size_t k = 6, ldx = n + 1;
    const auto xs = randvec(rng, k * ldx);
    const auto al = randvec(rng, k);
    std::vector<double> k1(n * ld + 1, 0.0), k2(n * ld + 1, 0.0);
    s.syrk_lower(xs.data(), k, ldx, al.data(), k1.data(), n, ld);
    v.syrk_lower(xs.data(), k, ldx, al.data(), k2.data(), n, ld);
    close(k1, k2, 10.0);
  }
}

TEST_CASE("force_isa switches the active table") {
  const Isa before = kernels::active_isa();
  CHECK(kernels::force_isa(Isa::scalar));
  CHECK(kernels::active_isa() == Isa::scalar);
  const std::vector<double> x{1, 2};
  CHECK(kernels::dot(x, x) == 5.0);
  if (kernels::isa_available(Isa::avx2)) {
    CHECK(kernels::force_isa(Isa::avx2));
    CHECK(kernels::active_isa() == Isa::avx2);
  } else {
    CHECK_FALSE(kernels::force_isa(Isa::avx2));
  }
  kernels::force_isa(before);
}
