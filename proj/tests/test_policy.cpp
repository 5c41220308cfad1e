#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sgpg/policy.hpp"

using namespace sgpg;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Vector random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Random scalar loss of the outputs: L = c_m . mean + c_s . log_std + q ||mean||^2.
struct Loss {
  Vector cm, cs;
  double q;
  double value(const GaussDist& d) const {
    double v = 0.0;
    for (std::size_t i = 0; i < d.dim(); ++i)
      v += cm[i] * d.mean[i] + cs[i] * std::log(d.std[i]) + q * d.mean[i] * d.mean[i];
    return v;
  }
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace

TEST_CASE("zero network gives N(0, 1)") {
  const MlpPolicy p(PolicyArch{3, 2});
  const GaussDist d = p.forward(Vector{0.3, -2.0, 7.0});
  CHECK(d.mean == Vector{0.0, 0.0});
  CHECK(d.std == Vector{1.0, 1.0});
}

TEST_CASE("log density examples") {
  const GaussDist d{{0.4}, {1.0}};
  CHECK(gauss_log_prob(d, Vector{0.4}) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  const GaussDist e{{0.4}, {0.3}};
  CHECK(gauss_log_prob(e, Vector{0.7}) == doctest::Approx(-0.5 * kLog2Pi - std::log(0.3) - 0.5).epsilon(1e-14));
  // Location family.
  const GaussDist f{{0.4 + 2.5}, {0.3}};
  CHECK(gauss_log_prob(f, Vector{0.7 + 2.5}) == doctest::Approx(gauss_log_prob(e, Vector{0.7})).epsilon(1e-14));
}

TEST_CASE("log density partials") {
  const GaussDist d{{0.2, -1.0}, {0.5, 2.0}};
  const Vector a{0.7, -1.0};
  Vector dm(2), dl(2);
  gauss_log_prob_partials(d, a, dm, dl);
  CHECK(dm[0] == doctest::Approx(0.5 / 0.25));
  CHECK(dm[1] == doctest::Approx(0.0));
  CHECK(dl[0] == doctest::Approx(1.0 - 1.0));  // z = 1
  CHECK(dl[1] == doctest::Approx(-1.0));       // z = 0
}

TEST_CASE("std stays positive and saturation stays finite") {
  std::mt19937_64 rng(2);
  const MlpPolicy p = MlpPolicy::initialized(PolicyArch{4, 2}, rng);
  const GaussDist d = p.forward(Vector{1e6, -1e6, 3e6, 1e6});
  CHECK(all_finite(d.mean));
  for (double s : d.std) CHECK(s > 0.0);
  CHECK_THROWS(p.forward(Vector{NAN, 0, 0, 0}));
  CHECK_THROWS_AS(p.forward(Vector{0, 0}), DimensionError);
}

TEST_CASE("parameters round-trip") {
  std::mt19937_64 rng(3);
  MlpPolicy p = MlpPolicy::initialized(PolicyArch{2, 1, {5, 3}}, rng);
  CHECK(p.num_params() == (2 * 5 + 5) + (5 * 3 + 3) + (3 * 1 + 1) + 1);
  const Vector theta = random_vec(rng, p.num_params());
  p.set_parameters(theta);
  CHECK(p.parameters() == theta);
  CHECK_THROWS_AS(p.set_parameters(Vector(3)), DimensionError);
}

TEST_CASE("orthogonal initialization") {
  std::mt19937_64 rng(5);
  const MlpPolicy p = MlpPolicy::initialized(PolicyArch{3, 1, {8}}, rng, 0.5, 0.01);
  // First layer: 8 x 3 with orthonormal columns scaled by sqrt(2).
  const Vector& th = p.parameters();
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < 8; ++r) s += th[r * 3 + a] * th[r * 3 + b];
      CHECK(s == doctest::Approx(a == b ? 2.0 : 0.0).epsilon(1e-12));
    }
  CHECK(p.log_std()[0] == doctest::Approx(std::log(0.5)));
}

TEST_CASE("seeded initialization is reproducible") {
  std::mt19937_64 r1(42), r2(42);
  const MlpPolicy a = MlpPolicy::initialized(PolicyArch{2, 1}, r1);
  const MlpPolicy b = MlpPolicy::initialized(PolicyArch{2, 1}, r2);
  CHECK(a.parameters() == b.parameters());
}

TEST_CASE("backprop matches central differences") {
  std::mt19937_64 rng(8);
  const double h = 1e-5;
  for (int inst = 0; inst < 10; ++inst) {
    const std::size_t in = 1 + inst % 4, out = 1 + inst % 2;
    MlpPolicy p(PolicyArch{in, out, {6, 5}});
    p.set_parameters(random_vec(rng, p.num_params(), 0.5));
    const Vector s = random_vec(rng, in);
    const Loss loss{random_vec(rng, out), random_vec(rng, out), 0.3};

    const ForwardCache c = p.forward_cached(s);
    Vector dm(out), dl(out);
    for (std::size_t i = 0; i < out; ++i) {
      dm[i] = loss.cm[i] + 2.0 * loss.q * c.dist.mean[i];
      dl[i] = loss.cs[i];
    }
    Vector grad(p.num_params(), 0.0);
    p.backward(c, dm, dl, 1.0, grad);

    Vector theta = p.parameters();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double t0 = theta[k];
      theta[k] = t0 + h;
      p.set_parameters(theta);
      const double up = loss.value(p.forward(s));
      theta[k] = t0 - h;
      p.set_parameters(theta);
      const double down = loss.value(p.forward(s));
      theta[k] = t0;
      p.set_parameters(theta);
      const double fd = (up - down) / (2 * h);
      if (std::abs(fd) < 1e-7 && std::abs(grad[k]) < 1e-7) continue;
      CAPTURE(k);
      CHECK(rel_err(grad[k], fd) < 1e-4);
    }
  }
}

TEST_CASE("score at the mode vanishes for the mean head") {
  std::mt19937_64 rng(12);
  const MlpPolicy p = MlpPolicy::initialized(PolicyArch{3, 2, {4}}, rng);
  const Vector s{0.1, 0.2, -0.3};
  const GaussDist d = p.forward(s);
  const Vector g = p.log_prob_grad(s, d.mean);
  // Everything but log_std carries a factor (a - mean).
  for (std::size_t k = 0; k + 2 < g.size(); ++k) CHECK(g[k] == doctest::Approx(0.0));
  CHECK(g[g.size() - 1] == doctest::Approx(-1.0));
  CHECK(g[g.size() - 2] == doctest::Approx(-1.0));
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(13);
  const MlpPolicy p = MlpPolicy::initialized(PolicyArch{6, 2, {7, 3}}, rng);
  std::stringstream ss;
  p.save(ss);
  const MlpPolicy q = MlpPolicy::load(ss);
  CHECK(q.arch() == p.arch());
  CHECK(q.parameters() == p.parameters());

  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(MlpPolicy::load(truncated), CheckpointError);
  std::stringstream bad("NOTSG" + bytes.substr(5));
  CHECK_THROWS_AS(MlpPolicy::load(bad), CheckpointError);
  CHECK_THROWS_AS(MlpPolicy::load_file("/nonexistent/dir/x.sgpg"), CheckpointError);
}

TEST_CASE("seeded initialization is pinned") {
  // Recorded with libstdc++; std::normal_distribution is library specific.
  std::mt19937_64 rng(42);
  const MlpPolicy p = MlpPolicy::initialized(PolicyArch{2, 1, {4}}, rng);
  const Vector head{0.44648152164402699, 0.82811506029216408, -0.36358438158654111,
                    0.21876186205081594, -1.2075375075080585, 0.60152284043217941};
  REQUIRE(p.num_params() == 18);
  for (std::size_t i = 0; i < head.size(); ++i) CHECK(p.parameters()[i] == doctest::Approx(head[i]).epsilon(1e-14));
  const GaussDist d = p.forward(Vector{0.3, -0.7});
  CHECK(d.mean[0] == doctest::Approx(0.00039797162398248201).epsilon(1e-12));
  CHECK(d.std[0] == doctest::Approx(0.5));
}
