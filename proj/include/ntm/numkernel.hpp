#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>

#include "ntm/tensor.hpp"

namespace ntm {

using Rng = std::mt19937_64;

enum class Mode { kTrain, kEval };

enum class Activation { kIdentity, kSoftplus };

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ln(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Numerically stable softmax (max subtraction).
Vector softmax(std::span<const double> v);
void softmax_inplace(std::span<double> v);

/// Fully connected layer. An empty bias means the layer has none.
struct DenseLayer {
  Matrix weight;  // out_dim x in_dim
  Vector bias;    // out_dim or empty
  Activation activation = Activation::kIdentity;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act, bool with_bias = true)
      : weight(out_dim, in_dim), bias(with_bias ? out_dim : 0, 0.0), activation(act) {}

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  // Row-wise forward over a batch. `pre` receives the pre-activation values.
  Matrix forward(const Matrix& in, Matrix* pre = nullptr) const;
};

struct BatchNormState {
  Vector gamma;
  Vector beta_bn;
  Vector running_mean;
  Vector running_var;
  double momentum = 0.1;
  double eps_bn = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t dim)
      : gamma(dim, 1.0), beta_bn(dim, 0.0), running_mean(dim, 0.0), running_var(dim, 1.0) {}

  std::size_t dim() const { return gamma.size(); }
};

/// Intermediates of a training-mode batch-norm pass, kept for backward.
struct BatchNormCache {
  Vector mean;
  Vector var;  // biased batch variance
  Vector inv_std;
  Matrix normalized;  // before gamma / beta_bn
};

/// Batch normalization. Train mode standardizes with batch statistics and
/// updates the running statistics; eval mode uses the running statistics.
/// Throws DegenerateBatch for fewer than two rows in train mode.
Matrix batch_norm(const Matrix& batch, BatchNormState& state, Mode mode);

/// Train-mode forward without touching the running statistics.
Matrix batch_norm_train(const Matrix& batch, const BatchNormState& state, BatchNormCache& cache);
Matrix batch_norm_eval(const Matrix& batch, const BatchNormState& state);
void batch_norm_update_running(BatchNormState& state, const BatchNormCache& cache,
                               std::size_t batch_rows);
/// Gradient of a train-mode pass. d_gamma and d_beta are accumulated.
Matrix batch_norm_backward(const Matrix& d_out, const BatchNormCache& cache,
                           const BatchNormState& state, std::span<double> d_gamma,
                           std::span<double> d_beta);

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate) : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

/// One bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// Uniform draw strictly inside (0, 1), 53 bits of resolution.
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double gumbel_from_uniform(double u) {
  constexpr double kTiny = 1e-300;
  u = std::clamp(u, kTiny, 1.0 - 0x1.0p-53);
  return -std::log(-std::log(u));
}

Matrix gumbel_noise(std::size_t rows, std::size_t cols, Rng& rng);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares `analytic` against central differences of `f` at `point`.
/// Relative error per component is |a - n| / (|a| + |n| + 1e-12).
GradCheckResult grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> point, std::span<const double> analytic,
                           double eps = 1e-5);

}  // namespace ntm
