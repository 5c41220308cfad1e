#include "sgpg/policy.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "sgpg/kernels.hpp"

namespace sgpg {

namespace {

constexpr char kMagic[5] = {'S', 'G', 'P', 'G', '1'};

void put_u64(std::ostream& out, std::uint64_t x) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw CheckpointError("checkpoint: truncated");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return x;
}

// out x in matrix with orthonormal rows or columns, whichever is shorter.
void orthogonal_fill(std::size_t out, std::size_t in, double gain, std::mt19937_64& rng,
                     double* w) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t rows = std::max(out, in), cols = std::min(out, in);
  Eigen::MatrixXd g(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Sign fix so the draw is uniform over the orthogonal group.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (std::size_t j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  for (std::size_t i = 0; i < out; ++i)
    for (std::size_t j = 0; j < in; ++j)
      w[i * in + j] = gain * (out >= in ? q(i, j) : q(j, i));
}

}  // namespace

double gauss_log_prob(const GaussDist& d, std::span<const double> a) {
  if (a.size() != d.dim()) throw DimensionError("log_prob: action dimension");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = (a[i] - d.mean[i]) / d.std[i];
    lp -= std::log(d.std[i]) + half_log_2pi + 0.5 * z * z;
  }
  return lp;
}

void gauss_log_prob_partials(const GaussDist& d, std::span<const double> a,
                             std::span<double> d_mean, std::span<double> d_log_std) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = (a[i] - d.mean[i]) / d.std[i];
    d_mean[i] = z / d.std[i];
    d_log_std[i] = z * z - 1.0;
  }
}

MlpPolicy::MlpPolicy(PolicyArch arch, double init_std) : arch_(std::move(arch)) {
  if (arch_.input == 0 || arch_.output == 0) throw DimensionError("MlpPolicy: empty input or output");
  if (!(init_std > 0.0)) throw std::invalid_argument("MlpPolicy: init_std must be positive");
  std::size_t offset = 0, prev = arch_.input;
  auto add = [&](std::size_t out) {
    if (out == 0) throw DimensionError("MlpPolicy: zero-width layer");
    layers_.push_back({prev, out, offset, offset + out * prev});
    offset += out * prev + out;
    prev = out;
  };
  for (std::size_t h : arch_.hidden) add(h);
  add(arch_.output);
  log_std_ = offset;
  theta_.assign(offset + arch_.output, 0.0);
  for (std::size_t i = 0; i < arch_.output; ++i) theta_[log_std_ + i] = std::log(init_std);
}

MlpPolicy MlpPolicy::initialized(PolicyArch arch, std::mt19937_64& rng, double init_std,
                                 double head_scale) {
  MlpPolicy p(std::move(arch), init_std);
  for (std::size_t k = 0; k < p.layers_.size(); ++k) {
    const Layer& l = p.layers_[k];
    const bool head = k + 1 == p.layers_.size();
    orthogonal_fill(l.out, l.in, head ? head_scale : std::numbers::sqrt2, rng, p.theta_.data() + l.w);
  }
  return p;
}

ForwardCache MlpPolicy::forward_cached(std::span<const double> s) const {
  if (s.size() != arch_.input) throw DimensionError("MlpPolicy::forward: state dimension");
  if (!all_finite(s)) throw std::domain_error("MlpPolicy::forward: non-finite input");
  const auto& kt = kernels::active();
  ForwardCache c;
  c.input.assign(s.begin(), s.end());
  const Vector* x = &c.input;
  c.hidden.reserve(arch_.hidden.size());
  for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
    const Layer& l = layers_[k];
    Vector h(theta_.begin() + l.b, theta_.begin() + l.b + l.out);
    kt.gemv(theta_.data() + l.w, l.out, l.in, l.in, x->data(), h.data());
    for (double& e : h) e = std::tanh(e);
    c.hidden.push_back(std::move(h));
    x = &c.hidden.back();
  }
  const Layer& head = layers_.back();
  c.dist.mean.assign(theta_.begin() + head.b, theta_.begin() + head.b + head.out);
  kt.gemv(theta_.data() + head.w, head.out, head.in, head.in, x->data(), c.dist.mean.data());
  c.dist.std.resize(arch_.output);
  for (std::size_t i = 0; i < arch_.output; ++i) c.dist.std[i] = std::exp(theta_[log_std_ + i]);
  return c;
}

GaussDist MlpPolicy::forward(std::span<const double> s) const { return forward_cached(s).dist; }

double MlpPolicy::log_prob(std::span<const double> s, std::span<const double> a) const {
  return gauss_log_prob(forward(s), a);
}

void MlpPolicy::backward(const ForwardCache& cache, std::span<const double> d_mean,
                         std::span<const double> d_log_std, double scale,
                         std::span<double> grad) const {
  if (grad.size() != theta_.size()) throw DimensionError("MlpPolicy::backward: gradient size");
  if (d_mean.size() != arch_.output || d_log_std.size() != arch_.output)
    throw DimensionError("MlpPolicy::backward: upstream size");
  const auto& kt = kernels::active();
  for (std::size_t i = 0; i < arch_.output; ++i) grad[log_std_ + i] += scale * d_log_std[i];

  Vector delta(d_mean.begin(), d_mean.end());
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Layer& l = layers_[k];
    const Vector& x = k == 0 ? cache.input : cache.hidden[k - 1];
    kt.ger(scale, delta.data(), l.out, x.data(), l.in, grad.data() + l.w, l.in);
    kt.axpy(scale, delta.data(), grad.data() + l.b, l.out);
    if (k == 0) break;
    Vector up(l.in, 0.0);
    kt.gemv_t(theta_.data() + l.w, l.out, l.in, l.in, delta.data(), up.data());
    for (std::size_t j = 0; j < l.in; ++j) up[j] *= 1.0 - x[j] * x[j];
    delta = std::move(up);
  }
}

Vector MlpPolicy::log_prob_grad(std::span<const double> s, std::span<const double> a) const {
  const ForwardCache c = forward_cached(s);
  if (a.size() != arch_.output) throw DimensionError("log_prob_grad: action dimension");
  Vector dm(arch_.output), dl(arch_.output), g(theta_.size(), 0.0);
  gauss_log_prob_partials(c.dist, a, dm, dl);
  backward(c, dm, dl, 1.0, g);
  return g;
}

void MlpPolicy::set_parameters(std::span<const double> theta) {
  if (theta.size() != theta_.size()) throw DimensionError("MlpPolicy: parameter count");
  theta_.assign(theta.begin(), theta.end());
}

std::span<const double> MlpPolicy::log_std() const {
  return {theta_.data() + log_std_, arch_.output};
}

void MlpPolicy::save(std::ostream& out) const {
  out.write(kMagic, sizeof kMagic);
  put_u64(out, arch_.input);
  put_u64(out, arch_.output);
  put_u64(out, arch_.hidden.size());
  for (std::size_t h : arch_.hidden) put_u64(out, h);
  put_u64(out, theta_.size());
  for (double x : theta_) put_u64(out, std::bit_cast<std::uint64_t>(x));
  if (!out) throw CheckpointError("checkpoint: write failed");
}

MlpPolicy MlpPolicy::load(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic))
    throw CheckpointError("checkpoint: bad magic (expected SGPG1)");
  PolicyArch arch;
  arch.input = get_u64(in);
  arch.output = get_u64(in);
  const std::uint64_t layers = get_u64(in);
  if (layers > 64) throw CheckpointError("checkpoint: implausible layer count");
  arch.hidden.clear();
  for (std::uint64_t i = 0; i < layers; ++i) arch.hidden.push_back(get_u64(in));
  MlpPolicy p(arch);
  if (get_u64(in) != p.num_params()) throw CheckpointError("checkpoint: parameter count mismatch");
  for (double& x : p.theta_) x = std::bit_cast<double>(get_u64(in));
  return p;
}

void MlpPolicy::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path);
  save(out);
}

MlpPolicy MlpPolicy::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);
  return load(in);
}

}  // namespace sgpg
