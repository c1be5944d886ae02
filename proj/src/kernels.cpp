#include "ntm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "ntm/numkernel.hpp"

namespace ntm::kernels {
namespace {

// Per-row bodies shared by the serial and OpenMP drivers so that both follow
// the same floating-point evaluation order.

inline void affine_row(const Matrix& in, const Matrix& weight, std::span<const double> bias,
                       Matrix& out, std::size_t b) {
  const auto x = in.row(b);
  auto y = out.row(b);
  for (std::size_t o = 0; o < weight.rows(); ++o) {
    const auto w = weight.row(o);
    double acc = bias.empty() ? 0.0 : bias[o];
    for (std::size_t i = 0; i < w.size(); ++i) acc += x[i] * w[i];
    y[o] = acc;
  }
}

inline void backward_input_row(const Matrix& d_out, const Matrix& weight, Matrix& d_in,
                               std::size_t b) {
  auto dx = d_in.row(b);
  std::fill(dx.begin(), dx.end(), 0.0);
  const auto dy = d_out.row(b);
  for (std::size_t o = 0; o < weight.rows(); ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    const auto w = weight.row(o);
    for (std::size_t i = 0; i < w.size(); ++i) dx[i] += g * w[i];
  }
}

inline void backward_params_row(const Matrix& d_out, const Matrix& in, Matrix& d_weight,
                                std::span<double> d_bias, std::size_t o) {
  auto dw = d_weight.row(o);
  double db = 0.0;
  for (std::size_t b = 0; b < d_out.rows(); ++b) {
    const double g = d_out(b, o);
    db += g;
    if (g == 0.0) continue;
    const auto x = in.row(b);
    for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += g * x[i];
  }
  if (!d_bias.empty()) d_bias[o] += db;
}

inline void softmax_row(Matrix& m, std::size_t r) { softmax_inplace(m.row(r)); }

inline void softplus_row(const Matrix& in, Matrix& out, std::size_t r) {
  const auto x = in.row(r);
  auto y = out.row(r);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = ntm::softplus(x[i]);
}

inline void softplus_backward_row(const Matrix& d_out, const Matrix& pre, Matrix& d_in,
                                  std::size_t r) {
  const auto g = d_out.row(r);
  const auto a = pre.row(r);
  auto d = d_in.row(r);
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * sigmoid(a[i]);
}

inline void gather_add_row(const Matrix& a, std::span<const std::size_t> ia, const Matrix& b,
                           std::span<const std::size_t> ib, std::span<const double> bias, Matrix& out,
                           std::size_t r) {
  const auto x = a.row(ia[r]);
  const auto y = b.row(ib[r]);
  auto o = out.row(r);
  for (std::size_t j = 0; j < o.size(); ++j) o[j] = x[j] + y[j] + (bias.empty() ? 0.0 : bias[j]);
}

inline void segment_sum_column(const Matrix& in, std::span<const std::size_t> segment, Matrix& out,
                               std::size_t col) {
  for (std::size_t r = 0; r < in.rows(); ++r) out(segment[r], col) += in(r, col);
}

void check_affine(const Matrix& in, const Matrix& weight, Matrix& out) {
  assert(in.cols() == weight.cols());
  if (out.rows() != in.rows() || out.cols() != weight.rows()) out = Matrix(in.rows(), weight.rows());
}

}  // namespace

namespace serial {

void affine(const Matrix& in, const Matrix& weight, std::span<const double> bias, Matrix& out) {
  check_affine(in, weight, out);
  for (std::size_t b = 0; b < in.rows(); ++b) affine_row(in, weight, bias, out, b);
}

void affine_backward_input(const Matrix& d_out, const Matrix& weight, Matrix& d_in) {
  if (d_in.rows() != d_out.rows() || d_in.cols() != weight.cols())
    d_in = Matrix(d_out.rows(), weight.cols());
  for (std::size_t b = 0; b < d_out.rows(); ++b) backward_input_row(d_out, weight, d_in, b);
}

void affine_backward_params(const Matrix& d_out, const Matrix& in, Matrix& d_weight,
                            std::span<double> d_bias) {
  for (std::size_t o = 0; o < d_weight.rows(); ++o)
    backward_params_row(d_out, in, d_weight, d_bias, o);
}

void softmax_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) softmax_row(m, r);
}

void softplus(const Matrix& in, Matrix& out) {
  if (out.rows() != in.rows() || out.cols() != in.cols()) out = Matrix(in.rows(), in.cols());
  for (std::size_t r = 0; r < in.rows(); ++r) softplus_row(in, out, r);
}

void softplus_backward(const Matrix& d_out, const Matrix& pre, Matrix& d_in) {
  if (d_in.rows() != d_out.rows() || d_in.cols() != d_out.cols())
    d_in = Matrix(d_out.rows(), d_out.cols());
  for (std::size_t r = 0; r < d_out.rows(); ++r) softplus_backward_row(d_out, pre, d_in, r);
}

void gather_add(const Matrix& a, std::span<const std::size_t> ia, const Matrix& b,
                std::span<const std::size_t> ib, std::span<const double> bias, Matrix& out) {
  out = Matrix(ia.size(), a.cols());
  for (std::size_t r = 0; r < ia.size(); ++r) gather_add_row(a, ia, b, ib, bias, out, r);
}

void segment_sum(const Matrix& in, std::span<const std::size_t> segment, std::size_t n_segments,
                 Matrix& out) {
  out = Matrix(n_segments, in.cols());
  for (std::size_t c = 0; c < in.cols(); ++c) segment_sum_column(in, segment, out, c);
}

}  // namespace serial

namespace omp {

void affine(const Matrix& in, const Matrix& weight, std::span<const double> bias, Matrix& out) {
  check_affine(in, weight, out);
  const auto n = static_cast<std::int64_t>(in.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n; ++b) affine_row(in, weight, bias, out, static_cast<std::size_t>(b));
}

void affine_backward_input(const Matrix& d_out, const Matrix& weight, Matrix& d_in) {
  if (d_in.rows() != d_out.rows() || d_in.cols() != weight.cols())
    d_in = Matrix(d_out.rows(), weight.cols());
  const auto n = static_cast<std::int64_t>(d_out.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n; ++b)
    backward_input_row(d_out, weight, d_in, static_cast<std::size_t>(b));
}

void affine_backward_params(const Matrix& d_out, const Matrix& in, Matrix& d_weight,
                            std::span<double> d_bias) {
  const auto n = static_cast<std::int64_t>(d_weight.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t o = 0; o < n; ++o)
    backward_params_row(d_out, in, d_weight, d_bias, static_cast<std::size_t>(o));
}

void softmax_rows(Matrix& m) {
  const auto n = static_cast<std::int64_t>(m.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) softmax_row(m, static_cast<std::size_t>(r));
}

void softplus(const Matrix& in, Matrix& out) {
  if (out.rows() != in.rows() || out.cols() != in.cols()) out = Matrix(in.rows(), in.cols());
  const auto n = static_cast<std::int64_t>(in.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) softplus_row(in, out, static_cast<std::size_t>(r));
}

void softplus_backward(const Matrix& d_out, const Matrix& pre, Matrix& d_in) {
  if (d_in.rows() != d_out.rows() || d_in.cols() != d_out.cols())
    d_in = Matrix(d_out.rows(), d_out.cols());
  const auto n = static_cast<std::int64_t>(d_out.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r)
    softplus_backward_row(d_out, pre, d_in, static_cast<std::size_t>(r));
}

void gather_add(const Matrix& a, std::span<const std::size_t> ia, const Matrix& b,
                std::span<const std::size_t> ib, std::span<const double> bias, Matrix& out) {
  out = Matrix(ia.size(), a.cols());
  const auto n = static_cast<std::int64_t>(ia.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) gather_add_row(a, ia, b, ib, bias, out, static_cast<std::size_t>(r));
}

void segment_sum(const Matrix& in, std::span<const std::size_t> segment, std::size_t n_segments,
                 Matrix& out) {
  out = Matrix(n_segments, in.cols());
  const auto n = static_cast<std::int64_t>(in.cols());
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n; ++c) segment_sum_column(in, segment, out, static_cast<std::size_t>(c));
}

}  // namespace omp
}  // namespace ntm::kernels
