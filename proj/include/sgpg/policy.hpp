#pragma once

// Gaussian MLP policy: tanh hidden layers, linear mean head and a
// state-independent log standard deviation. Forward and reverse passes are
// written out by hand; the parameter vector theta is the concatenation
//
//   [W_1, b_1, ..., W_L, b_L, W_head, b_head, log_std]
//
// with every W stored row-major (out x in).

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "sgpg/gauss.hpp"
#include "sgpg/linalg.hpp"

namespace sgpg {

struct PolicyArch {
  std::size_t input = 0;
  std::size_t output = 0;
  std::vector<std::size_t> hidden{64, 64};

  friend bool operator==(const PolicyArch&, const PolicyArch&) = default;
};

// Intermediate values of one forward pass, kept for the reverse pass.
struct ForwardCache {
  Vector input;
  std::vector<Vector> hidden;  // post-tanh activations per hidden layer
  GaussDist dist;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MlpPolicy {
 public:
  // All parameters zero except log_std = log(init_std).
  explicit MlpPolicy(PolicyArch arch, double init_std = 1.0);

  // Orthogonal hidden weights with gain sqrt(2), head weights scaled by
  // head_scale, zero biases, log_std = log(init_std).
  static MlpPolicy initialized(PolicyArch arch, std::mt19937_64& rng, double init_std = 0.5,
                               double head_scale = 0.01);

  const PolicyArch& arch() const { return arch_; }
  std::size_t num_params() const { return theta_.size(); }

  GaussDist forward(std::span<const double> s) const;
  ForwardCache forward_cached(std::span<const double> s) const;

  double log_prob(std::span<const double> s, std::span<const double> a) const;

  // Reverse pass for any scalar loss of the forward outputs: given
  // dL/dmean and dL/dlog_std, accumulates scale * dL/dtheta into grad.
  void backward(const ForwardCache& cache, std::span<const double> d_mean,
                std::span<const double> d_log_std, double scale,
                std::span<double> grad) const;

  // d log_prob / dtheta at (s, a).
  Vector log_prob_grad(std::span<const double> s, std::span<const double> a) const;

  const Vector& parameters() const { return theta_; }
  void set_parameters(std::span<const double> theta);
  std::span<const double> log_std() const;

  void save(std::ostream& out) const;
  static MlpPolicy load(std::istream& in);
  void save_file(const std::string& path) const;
  static MlpPolicy load_file(const std::string& path);

 private:
  struct Layer {
    std::size_t in, out, w, b;  // offsets into theta_
  };

  PolicyArch arch_;
  std::vector<Layer> layers_;  // hidden layers then the head
  std::size_t log_std_ = 0;
  Vector theta_;
};

// d(log N(a; mean, std)) with respect to mean and log_std.
void gauss_log_prob_partials(const GaussDist& d, std::span<const double> a,
                             std::span<double> d_mean, std::span<double> d_log_std);
double gauss_log_prob(const GaussDist& d, std::span<const double> a);

}  // namespace sgpg
