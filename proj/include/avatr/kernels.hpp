#pragma once

// Dense numeric kernels used by the autodiff engine.
//
// Two implementations of every kernel live here: the OpenMP-parallel ones in
// `avatr::kernels` (used by the engine) and straight serial loops in
// `avatr::kernels::reference` (kept for tests and the benchmark). Parallel
// kernels split work over independent output rows/positions only, so every
// output element is accumulated by one thread in a fixed order and results
// are bitwise independent of the worker count.

#include <cstddef>
#include <span>

namespace avatr::kernels {

// c[m x n] = op(a) * op(b)  (or += when accumulate). op(a) is m x k.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const T> a, std::span<const T> b, std::span<T> c, bool accumulate);

// Geometry of a strided 1-D convolution without padding.
struct ConvGeometry {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t stride;
  std::size_t in_length;
  std::size_t out_length() const { return (in_length - kernel) / stride + 1; }
};

// y[o][t] = sum_c sum_k w[o][c][k] * x[c][t*stride + k]
template <typename T>
void conv1d(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<T> y);

// Adjoint of conv1d with respect to x: dx[c][t*stride + k] += w[o][c][k] * dy[o][t].
// This is also the forward pass of a transposed convolution.
template <typename T>
void conv1d_adjoint(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                    std::span<T> dx);

// dw[o][c][k] += sum_t dy[o][t] * x[c][t*stride + k]
template <typename T>
void conv1d_weight_grad(const ConvGeometry& g, std::span<const T> dy, std::span<const T> x,
                        std::span<T> dw);

// Row-wise softmax over the last axis with max subtraction.
template <typename T>
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const T> x, std::span<T> y);

// dx = y * (dy - <dy, y>) per row.
template <typename T>
void softmax_rows_backward(std::size_t rows, std::size_t cols, std::span<const T> y,
                           std::span<const T> dy, std::span<T> dx);

// Row-wise layer normalization. Writes the normalized rows (before the affine
// transform) to xhat and 1/sqrt(var + eps) per row to rstd.
template <typename T>
void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const T> x,
                     std::span<const T> gamma, std::span<const T> beta, T eps, std::span<T> y,
                     std::span<T> xhat, std::span<T> rstd);

// Accumulates into dx, dgamma, dbeta.
template <typename T>
void layer_norm_rows_backward(std::size_t rows, std::size_t cols, std::span<const T> dy,
                              std::span<const T> xhat, std::span<const T> rstd,
                              std::span<const T> gamma, std::span<T> dx, std::span<T> dgamma,
                              std::span<T> dbeta);

namespace reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const T> a, std::span<const T> b, std::span<T> c, bool accumulate);

template <typename T>
void conv1d(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<T> y);

template <typename T>
void conv1d_adjoint(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                    std::span<T> dx);

template <typename T>
void conv1d_weight_grad(const ConvGeometry& g, std::span<const T> dy, std::span<const T> x,
                        std::span<T> dw);

template <typename T>
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const T> x, std::span<T> y);

template <typename T>
void softmax_rows_backward(std::size_t rows, std::size_t cols, std::span<const T> y,
                           std::span<const T> dy, std::span<T> dx);

template <typename T>
void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const T> x,
                     std::span<const T> gamma, std::span<const T> beta, T eps, std::span<T> y,
                     std::span<T> xhat, std::span<T> rstd);

template <typename T>
void layer_norm_rows_backward(std::size_t rows, std::size_t cols, std::span<const T> dy,
                              std::span<const T> xhat, std::span<const T> rstd,
                              std::span<const T> gamma, std::span<T> dx, std::span<T> dgamma,
                              std::span<T> dbeta);

}  // namespace reference
}  // namespace avatr::kernels
