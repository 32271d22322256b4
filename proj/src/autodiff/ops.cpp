#include "avatr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "avatr/kernels.hpp"

namespace avatr::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::transpose: return "transpose";
    case OpKind::reshape: return "reshape";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::conv1d: return "conv1d";
    case OpKind::conv_transpose1d: return "conv_transpose1d";
    case OpKind::softmax: return "softmax";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::relu: return "relu";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::dropout: return "dropout";
    case OpKind::mean: return "mean";
    case OpKind::sum: return "sum";
    case OpKind::linear: return "linear";
    case OpKind::custom: return "custom";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(OpKind op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + to_string(a) + " vs " +
                   to_string(b));
}

[[noreturn]] void shape_error(OpKind op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op_name(op)) + ": " + why + " (shape " + to_string(a) + ")");
}

template <typename T>
Graph<T>& graph_of(OpKind op, std::initializer_list<Var<T>> vars) {
  Graph<T>* g = vars.begin()->graph;
  for (const Var<T>& v : vars)
    if (v.graph != g || g == nullptr) throw Error(std::string(op_name(op)) + ": mixed graphs");
  return *g;
}

enum class Broadcast { same, row, column, scalar };

template <typename T>
Broadcast classify(OpKind op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape == b.shape) return Broadcast::same;
  if (b.size() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.rank() == a.rank() && b.cols() == 1 && b.rows() == a.rows()) return Broadcast::column;
  shape_error(op, a.shape, b.shape);
}

inline std::size_t bindex(Broadcast kind, std::size_t r, std::size_t c, std::size_t cols) {
  switch (kind) {
    case Broadcast::same: return r * cols + c;
    case Broadcast::row: return c;
    case Broadcast::column: return r;
    case Broadcast::scalar: return 0;
  }
  return 0;
}

template <typename T>
void add_into(std::vector<T>& dst, const std::vector<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit out{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) out.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) out.inner *= s[i];
  return out;
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Graph<T>& g = graph_of(OpKind::matmul, {a, b});
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0])
    shape_error(OpKind::matmul, av.shape, bv.shape);
  const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
  Tensor<T> out = Tensor<T>::zeros({m, n});
  kernels::gemm<T>(false, false, m, n, k, av.data, bv.data, out.data, false);
  return g.record(OpKind::matmul, {a, b}, std::move(out), [m, n, k](Graph<T>& gr, const auto& node) {
    const auto& gy = gr.out_grad(node.output);
    const std::size_t ia = node.inputs[0], ib = node.inputs[1];
    if (gr.requires_grad(ia))
      kernels::gemm<T>(false, true, m, k, n, gy, gr.value(ib).data, gr.grad_buffer(ia), true);
    if (gr.requires_grad(ib))
      kernels::gemm<T>(true, false, k, n, m, gr.value(ia).data, gy, gr.grad_buffer(ib), true);
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Graph<T>& g = graph_of(OpKind::add, {a, b});
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const Broadcast kind = classify(OpKind::add, av, bv);
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor<T> out(av.shape, av.data);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] += bv.data[bindex(kind, r, c, cols)];
  return g.record(OpKind::add, {a, b}, std::move(out),
                  [kind, rows, cols](Graph<T>& gr, const auto& node) {
                    const auto& gy = gr.out_grad(node.output);
                    if (gr.requires_grad(node.inputs[0])) add_into(gr.grad_buffer(node.inputs[0]), gy);
                    if (gr.requires_grad(node.inputs[1])) {
                      auto& gb = gr.grad_buffer(node.inputs[1]);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c)
                          gb[bindex(kind, r, c, cols)] += gy[r * cols + c];
                    }
                  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Graph<T>& g = graph_of(OpKind::mul, {a, b});
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const Broadcast kind = classify(OpKind::mul, av, bv);
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor<T> out(av.shape, av.data);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] *= bv.data[bindex(kind, r, c, cols)];
  return g.record(OpKind::mul, {a, b}, std::move(out),
                  [kind, rows, cols](Graph<T>& gr, const auto& node) {
                    const auto& gy = gr.out_grad(node.output);
                    const auto& ad = gr.value(node.inputs[0]).data;
                    const auto& bd = gr.value(node.inputs[1]).data;
                    if (gr.requires_grad(node.inputs[0])) {
                      auto& ga = gr.grad_buffer(node.inputs[0]);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c)
                          ga[r * cols + c] += gy[r * cols + c] * bd[bindex(kind, r, c, cols)];
                    }
                    if (gr.requires_grad(node.inputs[1])) {
                      auto& gb = gr.grad_buffer(node.inputs[1]);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c)
                          gb[bindex(kind, r, c, cols)] += gy[r * cols + c] * ad[r * cols + c];
                    }
                  });
}

template <typename T>
Var<T> scalar_mul(Var<T> a, T c) {
  Graph<T>& g = graph_of(OpKind::scalar_mul, {a});
  Tensor<T> out(a.value().shape, a.value().data);
  for (T& x : out.data) x *= c;
  return g.record(OpKind::scalar_mul, {a}, std::move(out), [c](Graph<T>& gr, const auto& node) {
    const auto& gy = gr.out_grad(node.output);
    auto& ga = gr.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * gy[i];
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  Graph<T>& g = graph_of(OpKind::transpose, {a});
  const Tensor<T>& av = a.value();
  if (av.rank() != 2) shape_error(OpKind::transpose, av.shape, "expected rank 2");
  const std::size_t m = av.shape[0], n = av.shape[1];
  Tensor<T> out = Tensor<T>::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = av.data[i * n + j];
  return g.record(OpKind::transpose, {a}, std::move(out), [m, n](Graph<T>& gr, const auto& node) {
    const auto& gy = gr.out_grad(node.output);
    auto& ga = gr.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += gy[j * m + i];
  });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  Graph<T>& g = graph_of(OpKind::reshape, {a});
  if (numel(shape) != a.value().size()) shape_error(OpKind::reshape, a.shape(), shape);
  Tensor<T> out(std::move(shape), a.value().data);
  return g.record(OpKind::reshape, {a}, std::move(out), [](Graph<T>& gr, const auto& node) {
    add_into(gr.grad_buffer(node.inputs[0]), gr.out_grad(node.output));
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Graph<T>* g = parts.front().graph;
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_error(OpKind::concat, first, "axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Var<T>& p : parts) {
    if (p.graph != g) throw Error("concat: mixed graphs");
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_error(OpKind::concat, first, s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) shape_error(OpKind::concat, first, s);
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit sp = split_axis(out_shape, axis);
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& src = parts[p].value().data;
    const std::size_t e = extents[p];
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(src.begin() + o * e * sp.inner, e * sp.inner,
                  out.data.begin() + (o * sp.extent + offset) * sp.inner);
    offset += e;
  }
  return g->record(OpKind::concat, parts, std::move(out),
                   [sp, extents](Graph<T>& gr, const auto& node) {
                     const auto& gy = gr.out_grad(node.output);
                     std::size_t off = 0;
                     for (std::size_t p = 0; p < node.inputs.size(); ++p) {
                       const std::size_t e = extents[p];
                       if (gr.requires_grad(node.inputs[p])) {
                         auto& gp = gr.grad_buffer(node.inputs[p]);
                         for (std::size_t o = 0; o < sp.outer; ++o)
                           for (std::size_t i = 0; i < e * sp.inner; ++i)
                             gp[o * e * sp.inner + i] += gy[(o * sp.extent + off) * sp.inner + i];
                       }
                       off += e;
                     }
                   });
}

template <typename T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t start, std::size_t length) {
  Graph<T>& g = graph_of(OpKind::slice, {a});
  const Tensor<T>& av = a.value();
  if (axis >= av.rank()) shape_error(OpKind::slice, av.shape, "axis out of range");
  if (length == 0 || start + length > av.shape[axis])
    shape_error(OpKind::slice, av.shape,
                "range [" + std::to_string(start) + "," + std::to_string(start + length) +
                    ") out of bounds on axis " + std::to_string(axis));
  const AxisSplit sp = split_axis(av.shape, axis);
  Shape out_shape = av.shape;
  out_shape[axis] = length;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(av.data.begin() + (o * sp.extent + start) * sp.inner, length * sp.inner,
                out.data.begin() + o * length * sp.inner);
  return g.record(OpKind::slice, {a}, std::move(out),
                  [sp, start, length](Graph<T>& gr, const auto& node) {
                    const auto& gy = gr.out_grad(node.output);
                    auto& ga = gr.grad_buffer(node.inputs[0]);
                    for (std::size_t o = 0; o < sp.outer; ++o)
                      for (std::size_t i = 0; i < length * sp.inner; ++i)
                        ga[(o * sp.extent + start) * sp.inner + i] += gy[o * length * sp.inner + i];
                  });
}

template <typename T>
Var<T> conv1d(Var<T> x, Var<T> w, std::size_t stride) {
  Graph<T>& g = graph_of(OpKind::conv1d, {x, w});
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 3 || wv.shape[1] != xv.shape[0])
    shape_error(OpKind::conv1d, xv.shape, wv.shape);
  if (stride == 0) shape_error(OpKind::conv1d, wv.shape, "stride must be positive");
  const kernels::ConvGeometry geo{xv.shape[0], wv.shape[0], wv.shape[2], stride, xv.shape[1]};
  if (geo.in_length < geo.kernel) shape_error(OpKind::conv1d, xv.shape, wv.shape);
  Tensor<T> out = Tensor<T>::zeros({geo.out_channels, geo.out_length()});
  kernels::conv1d<T>(geo, xv.data, wv.data, out.data);
  return g.record(OpKind::conv1d, {x, w}, std::move(out), [geo](Graph<T>& gr, const auto& node) {
    const auto& gy = gr.out_grad(node.output);
    const std::size_t ix = node.inputs[0], iw = node.inputs[1];
    if (gr.requires_grad(ix))
      kernels::conv1d_adjoint<T>(geo, gy, gr.value(iw).data, gr.grad_buffer(ix));
    if (gr.requires_grad(iw))
      kernels::conv1d_weight_grad<T>(geo, gy, gr.value(ix).data, gr.grad_buffer(iw));
  });
}

template <typename T>
Var<T> conv_transpose1d(Var<T> x, Var<T> w, std::size_t stride) {
  Graph<T>& g = graph_of(OpKind::conv_transpose1d, {x, w});
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 3 || wv.shape[0] != xv.shape[0])
    shape_error(OpKind::conv_transpose1d, xv.shape, wv.shape);
  if (stride == 0) shape_error(OpKind::conv_transpose1d, wv.shape, "stride must be positive");
  // The transposed convolution is the adjoint of a conv1d mapping the
  // output back onto x.
  const std::size_t out_len = (xv.shape[1] - 1) * stride + wv.shape[2];
  const kernels::ConvGeometry geo{wv.shape[1], wv.shape[0], wv.shape[2], stride, out_len};
  Tensor<T> out = Tensor<T>::zeros({geo.in_channels, out_len});
  kernels::conv1d_adjoint<T>(geo, xv.data, wv.data, out.data);
  return g.record(OpKind::conv_transpose1d, {x, w}, std::move(out),
                  [geo](Graph<T>& gr, const auto& node) {
                    const auto& gy = gr.out_grad(node.output);
                    const std::size_t ix = node.inputs[0], iw = node.inputs[1];
                    if (gr.requires_grad(ix)) {
                      std::vector<T> tmp(gr.value(ix).data.size());
                      kernels::conv1d<T>(geo, gy, gr.value(iw).data, tmp);
                      add_into(gr.grad_buffer(ix), tmp);
                    }
                    if (gr.requires_grad(iw))
                      kernels::conv1d_weight_grad<T>(geo, gr.value(ix).data, gy, gr.grad_buffer(iw));
                  });
}

template <typename T>
Var<T> softmax(Var<T> a) {
  Graph<T>& g = graph_of(OpKind::softmax, {a});
  const Tensor<T>& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor<T> out = Tensor<T>::zeros(av.shape);
  kernels::softmax_rows<T>(rows, cols, av.data, out.data);
  return g.record(OpKind::softmax, {a}, std::move(out), [rows, cols](Graph<T>& gr, const auto& node) {
    kernels::softmax_rows_backward<T>(rows, cols, gr.value(node.output).data,
                                      gr.out_grad(node.output), gr.grad_buffer(node.inputs[0]));
  });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  Graph<T>& g = graph_of(OpKind::sigmoid, {a});
  Tensor<T> out(a.value().shape, a.value().data);
  for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
  return g.record(OpKind::sigmoid, {a}, std::move(out), [](Graph<T>& gr, const auto& node) {
    const auto& y = gr.value(node.output).data;
    const auto& gy = gr.out_grad(node.output);
    auto& ga = gr.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> relu(Var<T> a) {
  Graph<T>& g = graph_of(OpKind::relu, {a});
  Tensor<T> out(a.value().shape, a.value().data);
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return g.record(OpKind::relu, {a}, std::move(out), [](Graph<T>& gr, const auto& node) {
    const auto& x = gr.value(node.inputs[0]).data;
    const auto& gy = gr.out_grad(node.output);
    auto& ga = gr.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (x[i] > T(0)) ga[i] += gy[i];
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  Graph<T>& g = graph_of(OpKind::layer_norm, {x, gamma, beta});
  const Tensor<T>& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (gamma.value().size() != cols) shape_error(OpKind::layer_norm, xv.shape, gamma.shape());
  if (beta.value().size() != cols) shape_error(OpKind::layer_norm, xv.shape, beta.shape());
  Tensor<T> out = Tensor<T>::zeros(xv.shape);
  std::vector<T> xhat(xv.size());
  std::vector<T> rstd(rows);
  kernels::layer_norm_rows<T>(rows, cols, xv.data, gamma.value().data, beta.value().data, eps,
                              out.data, xhat, rstd);
  return g.record(OpKind::layer_norm, {x, gamma, beta}, std::move(out),
                  [rows, cols, xhat = std::move(xhat), rstd = std::move(rstd)](Graph<T>& gr,
                                                                                const auto& node) {
                    const std::size_t ix = node.inputs[0], ig = node.inputs[1], ib = node.inputs[2];
                    std::vector<T> dx(rows * cols, T(0)), dg(cols, T(0)), db(cols, T(0));
                    kernels::layer_norm_rows_backward<T>(rows, cols, gr.out_grad(node.output), xhat,
                                                         rstd, gr.value(ig).data, dx, dg, db);
                    if (gr.requires_grad(ix)) add_into(gr.grad_buffer(ix), dx);
                    if (gr.requires_grad(ig)) add_into(gr.grad_buffer(ig), dg);
                    if (gr.requires_grad(ib)) add_into(gr.grad_buffer(ib), db);
                  });
}

template <typename T>
Var<T> dropout(Var<T> x, double p) {
  Graph<T>& g = graph_of(OpKind::dropout, {x});
  if (!(p >= 0.0 && p < 1.0))
    throw ConfigError("dropout: rate " + std::to_string(p) + " outside [0, 1)");
  if (!g.training() || p == 0.0) return x;
  const T scale = T(1.0 / (1.0 - p));
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<T> mask(x.value().size());
  for (T& m : mask) m = keep(g.dropout_rng()) ? scale : T(0);
  Tensor<T> out(x.value().shape, x.value().data);
  for (std::size_t i = 0; i < mask.size(); ++i) out.data[i] *= mask[i];
  return g.record(OpKind::dropout, {x}, std::move(out),
                  [mask = std::move(mask)](Graph<T>& gr, const auto& node) {
                    const auto& gy = gr.out_grad(node.output);
                    auto& ga = gr.grad_buffer(node.inputs[0]);
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * mask[i];
                  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Graph<T>& g = graph_of(OpKind::sum, {a});
  T acc = 0;
  for (T v : a.value().data) acc += v;
  return g.record(OpKind::sum, {a}, Tensor<T>({1}, {acc}), [](Graph<T>& gr, const auto& node) {
    const T gy = gr.out_grad(node.output)[0];
    for (T& v : gr.grad_buffer(node.inputs[0])) v += gy;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  Graph<T>& g = graph_of(OpKind::mean, {a});
  const std::size_t n = a.value().size();
  T acc = 0;
  for (T v : a.value().data) acc += v;
  return g.record(OpKind::mean, {a}, Tensor<T>({1}, {acc / static_cast<T>(n)}),
                  [n](Graph<T>& gr, const auto& node) {
                    const T gy = gr.out_grad(node.output)[0] / static_cast<T>(n);
                    for (T& v : gr.grad_buffer(node.inputs[0])) v += gy;
                  });
}

template <typename T>
Var<T> mean(Var<T> a, std::size_t axis) {
  Graph<T>& g = graph_of(OpKind::mean, {a});
  const Tensor<T>& av = a.value();
  if (av.rank() != 2 || axis > 1) shape_error(OpKind::mean, av.shape, "expected rank 2, axis 0 or 1");
  const std::size_t m = av.shape[0], n = av.shape[1];
  const std::size_t count = axis == 0 ? m : n;
  Tensor<T> out = Tensor<T>::zeros({axis == 0 ? n : m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[axis == 0 ? j : i] += av.data[i * n + j];
  for (T& v : out.data) v /= static_cast<T>(count);
  return g.record(OpKind::mean, {a}, std::move(out), [m, n, axis, count](Graph<T>& gr, const auto& node) {
    const auto& gy = gr.out_grad(node.output);
    auto& ga = gr.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        ga[i * n + j] += gy[axis == 0 ? j : i] / static_cast<T>(count);
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> wt, Var<T> b) {
  Graph<T>& g = graph_of(OpKind::linear, {x, wt, b});
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = wt.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.shape[1] != wv.shape[0])
    shape_error(OpKind::linear, xv.shape, wv.shape);
  const std::size_t m = xv.shape[0], k = xv.shape[1], n = wv.shape[1];
  if (b.value().size() != n) shape_error(OpKind::linear, wv.shape, b.shape());
  Tensor<T> out = Tensor<T>::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) std::copy_n(b.value().data.begin(), n, out.data.begin() + i * n);
  kernels::gemm<T>(false, false, m, n, k, xv.data, wv.data, out.data, true);
  return g.record(OpKind::linear, {x, wt, b}, std::move(out),
                  [m, n, k](Graph<T>& gr, const auto& node) {
                    const auto& gy = gr.out_grad(node.output);
                    const std::size_t ix = node.inputs[0], iw = node.inputs[1], ib = node.inputs[2];
                    if (gr.requires_grad(ix))
                      kernels::gemm<T>(false, true, m, k, n, gy, gr.value(iw).data, gr.grad_buffer(ix), true);
                    if (gr.requires_grad(iw))
                      kernels::gemm<T>(true, false, k, n, m, gr.value(ix).data, gy, gr.grad_buffer(iw), true);
                    if (gr.requires_grad(ib)) {
                      auto& gb = gr.grad_buffer(ib);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) gb[j] += gy[i * n + j];
                    }
                  });
}

#define AVATR_INSTANTIATE_OPS(T)                                                        \
  template Var<T> matmul<T>(Var<T>, Var<T>);                                           \
  template Var<T> add<T>(Var<T>, Var<T>);                                              \
  template Var<T> mul<T>(Var<T>, Var<T>);                                              \
  template Var<T> scalar_mul<T>(Var<T>, T);                                            \
  template Var<T> transpose<T>(Var<T>);                                                \
  template Var<T> reshape<T>(Var<T>, Shape);                                           \
  template Var<T> concat<T>(const std::vector<Var<T>>&, std::size_t);                  \
  template Var<T> slice<T>(Var<T>, std::size_t, std::size_t, std::size_t);             \
  template Var<T> conv1d<T>(Var<T>, Var<T>, std::size_t);                              \
  template Var<T> conv_transpose1d<T>(Var<T>, Var<T>, std::size_t);                    \
  template Var<T> softmax<T>(Var<T>);                                                  \
  template Var<T> sigmoid<T>(Var<T>);                                                  \
  template Var<T> relu<T>(Var<T>);                                                     \
  template Var<T> layer_norm<T>(Var<T>, Var<T>, Var<T>, T);                            \
  template Var<T> dropout<T>(Var<T>, double);                                          \
  template Var<T> sum<T>(Var<T>);                                                      \
  template Var<T> mean<T>(Var<T>);                                                     \
  template Var<T> mean<T>(Var<T>, std::size_t);                                        \
  template Var<T> linear<T>(Var<T>, Var<T>, Var<T>);

AVATR_INSTANTIATE_OPS(float)
AVATR_INSTANTIATE_OPS(double)

}  // namespace avatr::ad
