#include "ntm/numkernel.hpp"

#include <algorithm>
#include <cmath>

#include "ntm/error.hpp"
#include "ntm/kernels.hpp"

namespace ntm {

void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

Vector softmax(std::span<const double> v) {
  Vector out(v.begin(), v.end());
  softmax_inplace(out);
  return out;
}

Matrix DenseLayer::forward(const Matrix& in, Matrix* pre) const {
  Matrix a;
  kernels::affine(in, weight, bias, a);
  if (activation == Activation::kIdentity) {
    if (pre) *pre = a;
    return a;
  }
  Matrix out;
  kernels::softplus(a, out);
  if (pre) *pre = std::move(a);
  return out;
}

Matrix batch_norm_train(const Matrix& batch, const BatchNormState& state, BatchNormCache& cache) {
  const std::size_t n = batch.rows();
  const std::size_t d = batch.cols();
  if (n < 2) throw Error(ErrorCode::kDegenerateBatch, "batch norm needs at least 2 rows in train mode");
  cache.mean.assign(d, 0.0);
  cache.var.assign(d, 0.0);
  cache.inv_std.assign(d, 0.0);
  cache.normalized = Matrix(n, d);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t j = 0; j < d; ++j) cache.mean[j] += batch(b, j);
  for (double& m : cache.mean) m /= static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = batch(b, j) - cache.mean[j];
      cache.var[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) {
    cache.var[j] /= static_cast<double>(n);
    cache.inv_std[j] = 1.0 / std::sqrt(cache.var[j] + state.eps_bn);
  }
  Matrix out(n, d);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t j = 0; j < d; ++j) {
      const double z = (batch(b, j) - cache.mean[j]) * cache.inv_std[j];
      cache.normalized(b, j) = z;
      out(b, j) = state.gamma[j] * z + state.beta_bn[j];
    }
  return out;
}

Matrix batch_norm_eval(const Matrix& batch, const BatchNormState& state) {
  Matrix out(batch.rows(), batch.cols());
  for (std::size_t j = 0; j < batch.cols(); ++j) {
    const double inv = 1.0 / std::sqrt(state.running_var[j] + state.eps_bn);
    for (std::size_t b = 0; b < batch.rows(); ++b)
      out(b, j) = state.gamma[j] * (batch(b, j) - state.running_mean[j]) * inv + state.beta_bn[j];
  }
  return out;
}

void batch_norm_update_running(BatchNormState& state, const BatchNormCache& cache,
                               std::size_t batch_rows) {
  const double unbias = static_cast<double>(batch_rows) / static_cast<double>(batch_rows - 1);
  for (std::size_t j = 0; j < state.dim(); ++j) {
    state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * cache.mean[j];
    state.running_var[j] =
        (1.0 - state.momentum) * state.running_var[j] + state.momentum * cache.var[j] * unbias;
  }
}

Matrix batch_norm(const Matrix& batch, BatchNormState& state, Mode mode) {
  if (mode == Mode::kEval) return batch_norm_eval(batch, state);
  BatchNormCache cache;
  Matrix out = batch_norm_train(batch, state, cache);
  batch_norm_update_running(state, cache, batch.rows());
  return out;
}

Matrix batch_norm_backward(const Matrix& d_out, const BatchNormCache& cache,
                           const BatchNormState& state, std::span<double> d_gamma,
                           std::span<double> d_beta) {
  const std::size_t n = d_out.rows();
  const std::size_t d = d_out.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix d_in(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    double sum_dn = 0.0;
    double sum_dn_z = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const double g = d_out(b, j);
      d_gamma[j] += g * cache.normalized(b, j);
      d_beta[j] += g;
      const double dn = g * state.gamma[j];
      sum_dn += dn;
      sum_dn_z += dn * cache.normalized(b, j);
    }
    for (std::size_t b = 0; b < n; ++b) {
      const double dn = d_out(b, j) * state.gamma[j];
      d_in(b, j) = cache.inv_std[j] * inv_n *
                   (static_cast<double>(n) * dn - sum_dn - cache.normalized(b, j) * sum_dn_z);
    }
  }
  return d_in;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  assert(params.size() == grads.size());
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps_adam);
  }
}

Matrix gumbel_noise(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix g(rows, cols);
  for (double& x : g.values()) x = gumbel_from_uniform(uniform_open01(rng));
  return g;
}

GradCheckResult grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> point, std::span<const double> analytic,
                           double eps) {
  assert(point.size() == analytic.size());
  GradCheckResult result;
  Vector x(point.begin(), point.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f(x);
    x[i] = saved - eps;
    const double down = f(x);
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
    if (i == 0 || rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = i;
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace ntm
