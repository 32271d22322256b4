#include <cmath>

#include "avatr/kernels.hpp"

namespace avatr::kernels::reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const T> a, std::span<const T> b, std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) {
        const T av = trans_a ? a[p * m + i] : a[i * k + p];
        const T bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void conv1d(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<T> y) {
  const std::size_t lout = g.out_length();
  for (std::size_t o = 0; o < g.out_channels; ++o)
    for (std::size_t t = 0; t < lout; ++t) {
      T acc = 0;
      for (std::size_t c = 0; c < g.in_channels; ++c)
        for (std::size_t kk = 0; kk < g.kernel; ++kk)
          acc += w[(o * g.in_channels + c) * g.kernel + kk] * x[c * g.in_length + t * g.stride + kk];
      y[o * lout + t] = acc;
    }
}

template <typename T>
void conv1d_adjoint(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                    std::span<T> dx) {
  const std::size_t lout = g.out_length();
  for (std::size_t o = 0; o < g.out_channels; ++o)
    for (std::size_t t = 0; t < lout; ++t)
      for (std::size_t c = 0; c < g.in_channels; ++c)
        for (std::size_t kk = 0; kk < g.kernel; ++kk)
          dx[c * g.in_length + t * g.stride + kk] +=
              w[(o * g.in_channels + c) * g.kernel + kk] * dy[o * lout + t];
}

template <typename T>
void conv1d_weight_grad(const ConvGeometry& g, std::span<const T> dy, std::span<const T> x,
                        std::span<T> dw) {
  const std::size_t lout = g.out_length();
  for (std::size_t o = 0; o < g.out_channels; ++o)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t kk = 0; kk < g.kernel; ++kk)
        for (std::size_t t = 0; t < lout; ++t)
          dw[(o * g.in_channels + c) * g.kernel + kk] +=
              dy[o * lout + t] * x[c * g.in_length + t * g.stride + kk];
}

template <typename T>
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const T> x, std::span<T> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = x[r * cols];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[r * cols + j]);
    T sum = 0;
    for (std::size_t j = 0; j < cols; ++j) sum += std::exp(x[r * cols + j] - mx);
    for (std::size_t j = 0; j < cols; ++j) y[r * cols + j] = std::exp(x[r * cols + j] - mx) / sum;
  }
}

template <typename T>
void softmax_rows_backward(std::size_t rows, std::size_t cols, std::span<const T> y,
                           std::span<const T> dy, std::span<T> dx) {
  // Full Jacobian product: J_ij = y_i (delta_ij - y_j).
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < cols; ++i) {
      T acc = 0;
      for (std::size_t j = 0; j < cols; ++j) {
        const T jac = y[r * cols + i] * ((i == j ? T(1) : T(0)) - y[r * cols + j]);
        acc += jac * dy[r * cols + j];
      }
      dx[r * cols + i] += acc;
    }
}

template <typename T>
void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const T> x,
                     std::span<const T> gamma, std::span<const T> beta, T eps, std::span<T> y,
                     std::span<T> xhat, std::span<T> rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    T mean = 0;
    for (std::size_t j = 0; j < cols; ++j) mean += x[r * cols + j];
    mean /= static_cast<T>(cols);
    T var = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      const T dv = x[r * cols + j] - mean;
      var += dv * dv;
    }
    var /= static_cast<T>(cols);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) {
      xhat[r * cols + j] = (x[r * cols + j] - mean) * rstd[r];
      y[r * cols + j] = gamma[j] * xhat[r * cols + j] + beta[j];
    }
  }
}

template <typename T>
void layer_norm_rows_backward(std::size_t rows, std::size_t cols, std::span<const T> dy,
                              std::span<const T> xhat, std::span<const T> rstd,
                              std::span<const T> gamma, std::span<T> dx, std::span<T> dgamma,
                              std::span<T> dbeta) {
  // Explicit Jacobian: d xhat_i / d x_j = rstd (delta_ij - 1/n - xhat_i xhat_j / n).
  const T n = static_cast<T>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      T acc = 0;
      for (std::size_t i = 0; i < cols; ++i) {
        const T jac = rstd[r] * ((i == j ? T(1) : T(0)) - T(1) / n -
                                 xhat[r * cols + i] * xhat[r * cols + j] / n);
        acc += dy[r * cols + i] * gamma[i] * jac;
      }
      dx[r * cols + j] += acc;
    }
    for (std::size_t j = 0; j < cols; ++j) {
      dgamma[j] += dy[r * cols + j] * xhat[r * cols + j];
      dbeta[j] += dy[r * cols + j];
    }
  }
}

#define AVATR_INSTANTIATE_REFERENCE(T)                                                          \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t, std::span<const T>, \
                        std::span<const T>, std::span<T>, bool);                               \
  template void conv1d<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,        \
                          std::span<T>);                                                       \
  template void conv1d_adjoint<T>(const ConvGeometry&, std::span<const T>, std::span<const T>, \
                                  std::span<T>);                                               \
  template void conv1d_weight_grad<T>(const ConvGeometry&, std::span<const T>,                 \
                                      std::span<const T>, std::span<T>);                       \
  template void softmax_rows<T>(std::size_t, std::size_t, std::span<const T>, std::span<T>);   \
  template void softmax_rows_backward<T>(std::size_t, std::size_t, std::span<const T>,         \
                                         std::span<const T>, std::span<T>);                    \
  template void layer_norm_rows<T>(std::size_t, std::size_t, std::span<const T>,               \
                                   std::span<const T>, std::span<const T>, T, std::span<T>,    \
                                   std::span<T>, std::span<T>);                                \
  template void layer_norm_rows_backward<T>(std::size_t, std::size_t, std::span<const T>,      \
                                            std::span<const T>, std::span<const T>,            \
                                            std::span<const T>, std::span<T>, std::span<T>,    \
                                            std::span<T>);

AVATR_INSTANTIATE_REFERENCE(float)
AVATR_INSTANTIATE_REFERENCE(double)

}  // namespace avatr::kernels::reference
