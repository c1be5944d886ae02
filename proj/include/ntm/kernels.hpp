#pragma once

// Dense batch kernels used by the forward and backward passes.
//
// Every kernel exists twice: a serial reference in `serial::` and an OpenMP
// version in `omp::`. The OpenMP versions split work over independent output
// rows only and keep each row's reduction order identical to the serial code,
// so both produce bit-identical results for any thread count. The unqualified
// functions in `kernels::` dispatch to the OpenMP versions.

#include <span>

#include "ntm/tensor.hpp"

namespace ntm::kernels {

namespace serial {

// out = in * weight^T + bias (bias may be empty). in: B x I, weight: O x I, out: B x O.
void affine(const Matrix& in, const Matrix& weight, std::span<const double> bias, Matrix& out);
// d_in = d_out * weight. d_out: B x O, d_in: B x I (overwritten).
void affine_backward_input(const Matrix& d_out, const Matrix& weight, Matrix& d_in);
// d_weight += d_out^T * in; d_bias += column sums of d_out (skipped when empty).
void affine_backward_params(const Matrix& d_out, const Matrix& in, Matrix& d_weight,
                            std::span<double> d_bias);
void softmax_rows(Matrix& m);
void softplus(const Matrix& in, Matrix& out);
// out(i,j) = in(i,j) * sigmoid(pre(i,j)): softplus backward.
void softplus_backward(const Matrix& d_out, const Matrix& pre, Matrix& d_in);
// out(r,:) = a(ia[r],:) + b(ib[r],:) + bias for every row r.
void gather_add(const Matrix& a, std::span<const std::size_t> ia, const Matrix& b,
                std::span<const std::size_t> ib, std::span<const double> bias, Matrix& out);
// out(s,:) = sum of in(r,:) over rows r with segment[r] == s, in row order.
void segment_sum(const Matrix& in, std::span<const std::size_t> segment, std::size_t n_segments,
                 Matrix& out);

}  // namespace serial

namespace omp {

void affine(const Matrix& in, const Matrix& weight, std::span<const double> bias, Matrix& out);
void affine_backward_input(const Matrix& d_out, const Matrix& weight, Matrix& d_in);
void affine_backward_params(const Matrix& d_out, const Matrix& in, Matrix& d_weight,
                            std::span<double> d_bias);
void softmax_rows(Matrix& m);
void softplus(const Matrix& in, Matrix& out);
void softplus_backward(const Matrix& d_out, const Matrix& pre, Matrix& d_in);
void gather_add(const Matrix& a, std::span<const std::size_t> ia, const Matrix& b,
                std::span<const std::size_t> ib, std::span<const double> bias, Matrix& out);
void segment_sum(const Matrix& in, std::span<const std::size_t> segment, std::size_t n_segments,
                 Matrix& out);

}  // namespace omp

using omp::affine;
using omp::affine_backward_input;
using omp::affine_backward_params;
using omp::softmax_rows;
using omp::softplus;
using omp::softplus_backward;
using omp::gather_add;
using omp::segment_sum;

}  // namespace ntm::kernels
