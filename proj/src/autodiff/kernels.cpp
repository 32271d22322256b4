#include "avatr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace avatr::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

template <typename T>
std::vector<T> transposed(std::span<const T> src, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

// A result this narrow leaves the i-p-j inner loop too short to vectorize.
constexpr std::size_t kNarrow = 16;
constexpr std::size_t kNarrowRows = 64;
constexpr std::size_t kNarrowChunk = 256;

// Accumulates C^T = B^T A^T so the long m axis is innermost. Every element
// still sums over p in increasing order, as in the row-major loop.
template <typename T>
void gemm_narrow(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 std::span<const T> a, std::span<const T> b, std::span<T> c, bool accumulate) {
  std::vector<T> at_buf, bt_buf;
  const T* at = a.data();  // k x m
  const T* bt = b.data();  // n x k
  if (!trans_a) {
    at_buf = transposed(a, m, k);
    at = at_buf.data();
  }
  if (!trans_b) {
    bt_buf = transposed(b, k, n);
    bt = bt_buf.data();
  }
  const auto chunks = static_cast<std::ptrdiff_t>((m + kNarrowChunk - 1) / kNarrowChunk);
  const bool par = m * n * k >= kParallelWork && chunks > 1;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ch = 0; ch < chunks; ++ch) {
    const std::size_t i0 = static_cast<std::size_t>(ch) * kNarrowChunk;
    const std::size_t len = std::min(kNarrowChunk, m - i0);
    T acc[kNarrowChunk];
    for (std::size_t j = 0; j < n; ++j) {
      T* __restrict row = acc;
      for (std::size_t i = 0; i < len; ++i) row[i] = accumulate ? c[(i0 + i) * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) {
        const T bv = bt[j * k + p];
        const T* __restrict col = at + p * m + i0;
        for (std::size_t i = 0; i < len; ++i) row[i] += bv * col[i];
      }
      for (std::size_t i = 0; i < len; ++i) c[(i0 + i) * n + j] = row[i];
    }
  }
}

}  // namespace

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const T> a, std::span<const T> b, std::span<T> c, bool accumulate) {
  if (n < kNarrow && m >= kNarrowRows) {
    gemm_narrow(trans_a, trans_b, m, n, k, a, b, c, accumulate);
    return;
  }
  std::vector<T> a_buf;
  std::vector<T> b_buf;
  const T* ap = a.data();
  const T* bp = b.data();
  if (trans_a) {
    a_buf = transposed(a, k, m);
    ap = a_buf.data();
  }
  if (trans_b) {
    b_buf = transposed(b, n, k);
    bp = b_buf.data();
  }
  T* cp = c.data();
  const bool par = m * n * k >= kParallelWork && m > 1;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    T* __restrict crow = cp + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::fill(crow, crow + n, T(0));
    const T* arow = ap + static_cast<std::size_t>(i) * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* __restrict brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void conv1d(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<T> y) {
  const std::size_t lout = g.out_length();
  const auto outs = static_cast<std::ptrdiff_t>(g.out_channels);
  const bool par = g.out_channels * lout * g.in_channels * g.kernel >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t oi = 0; oi < outs; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    T* yrow = y.data() + o * lout;
    for (std::size_t t = 0; t < lout; ++t) {
      T acc = 0;
      for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        const T* wk = w.data() + (o * g.in_channels + ci) * g.kernel;
        const T* xs = x.data() + ci * g.in_length + t * g.stride;
        for (std::size_t kk = 0; kk < g.kernel; ++kk) acc += wk[kk] * xs[kk];
      }
      yrow[t] = acc;
    }
  }
}

template <typename T>
void conv1d_adjoint(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                    std::span<T> dx) {
  // Gather form: each input position collects from the frames covering it.
  const std::size_t lout = g.out_length();
  const auto total = static_cast<std::ptrdiff_t>(g.in_channels * g.in_length);
  const bool par = g.out_channels * lout * g.in_channels * g.kernel >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const auto ci = static_cast<std::size_t>(idx) / g.in_length;
    const auto pos = static_cast<std::size_t>(idx) % g.in_length;
    // frames t with t*stride <= pos < t*stride + kernel
    const std::size_t t_hi = std::min(pos / g.stride, lout - 1);
    const std::size_t t_lo = pos + 1 > g.kernel ? (pos + 1 - g.kernel + g.stride - 1) / g.stride : 0;
    T acc = 0;
    for (std::size_t t = t_lo; t <= t_hi && t_lo <= t_hi; ++t) {
      const std::size_t kk = pos - t * g.stride;
      for (std::size_t o = 0; o < g.out_channels; ++o)
        acc += w[(o * g.in_channels + ci) * g.kernel + kk] * dy[o * lout + t];
    }
    dx[static_cast<std::size_t>(idx)] += acc;
  }
}

template <typename T>
void conv1d_weight_grad(const ConvGeometry& g, std::span<const T> dy, std::span<const T> x,
                        std::span<T> dw) {
  const std::size_t lout = g.out_length();
  const auto total = static_cast<std::ptrdiff_t>(g.out_channels * g.in_channels * g.kernel);
  const bool par = g.out_channels * lout * g.in_channels * g.kernel >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const auto u = static_cast<std::size_t>(idx);
    const std::size_t kk = u % g.kernel;
    const std::size_t ci = (u / g.kernel) % g.in_channels;
    const std::size_t o = u / (g.kernel * g.in_channels);
    const T* dyrow = dy.data() + o * lout;
    const T* xrow = x.data() + ci * g.in_length + kk;
    T acc = 0;
    for (std::size_t t = 0; t < lout; ++t) acc += dyrow[t] * xrow[t * g.stride];
    dw[u] += acc;
  }
}

template <typename T>
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const T> x, std::span<T> y) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (std::ptrdiff_t ri = 0; ri < nrows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const T* xr = x.data() + r * cols;
    T* yr = y.data() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T sum = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const T inv = T(1) / sum;
    for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
  }
}

template <typename T>
void softmax_rows_backward(std::size_t rows, std::size_t cols, std::span<const T> y,
                           std::span<const T> dy, std::span<T> dx) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (std::ptrdiff_t ri = 0; ri < nrows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const T* yr = y.data() + r * cols;
    const T* gr = dy.data() + r * cols;
    T dot = 0;
    for (std::size_t j = 0; j < cols; ++j) dot += yr[j] * gr[j];
    T* dr = dx.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) dr[j] += yr[j] * (gr[j] - dot);
  }
}

template <typename T>
void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const T> x,
                     std::span<const T> gamma, std::span<const T> beta, T eps, std::span<T> y,
                     std::span<T> xhat, std::span<T> rstd) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (std::ptrdiff_t ri = 0; ri < nrows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const T* xr = x.data() + r * cols;
    T mean = 0;
    for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
    mean /= static_cast<T>(cols);
    T var = 0;
    for (std::size_t j = 0; j < cols; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(cols);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t j = 0; j < cols; ++j) {
      const T h = (xr[j] - mean) * rs;
      xhat[r * cols + j] = h;
      y[r * cols + j] = h * gamma[j] + beta[j];
    }
  }
}

template <typename T>
void layer_norm_rows_backward(std::size_t rows, std::size_t cols, std::span<const T> dy,
                              std::span<const T> xhat, std::span<const T> rstd,
                              std::span<const T> gamma, std::span<T> dx, std::span<T> dgamma,
                              std::span<T> dbeta) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
  const bool par = rows * cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ri = 0; ri < nrows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const T* g = dy.data() + r * cols;
    const T* h = xhat.data() + r * cols;
    T mean_g = 0;
    T mean_gh = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      const T gg = g[j] * gamma[j];
      mean_g += gg;
      mean_gh += gg * h[j];
    }
    mean_g /= static_cast<T>(cols);
    mean_gh /= static_cast<T>(cols);
    T* d = dx.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j)
      d[j] += rstd[r] * (g[j] * gamma[j] - mean_g - h[j] * mean_gh);
  }
  const auto ncols = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ji = 0; ji < ncols; ++ji) {
    const auto j = static_cast<std::size_t>(ji);
    T sg = 0;
    T sb = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      sg += dy[r * cols + j] * xhat[r * cols + j];
      sb += dy[r * cols + j];
    }
    dgamma[j] += sg;
    dbeta[j] += sb;
  }
}

#define AVATR_INSTANTIATE_KERNELS(T)                                                            \
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

AVATR_INSTANTIATE_KERNELS(float)
AVATR_INSTANTIATE_KERNELS(double)

}  // namespace avatr::kernels
