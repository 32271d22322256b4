#pragma once

// Differentiable primitives. Every op validates shapes and throws ShapeError
// naming the op and the offending shapes.
//
// Broadcasting in add/mul is limited to what the models need: the second
// operand may match the first exactly, be a row vector ([n] or [1,n]), a
// column ([m,1]) or a scalar, where the first operand is viewed as
// rows() x cols().

#include <cstdint>
#include <vector>

#include "avatr/graph.hpp"

namespace avatr::ad {

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> mul(Var<T> a, Var<T> b);

template <typename T>
Var<T> scalar_mul(Var<T> a, T c);

template <typename T>
Var<T> transpose(Var<T> a);

// Same data, new shape with identical element count.
template <typename T>
Var<T> reshape(Var<T> a, Shape shape);

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);

template <typename T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t start, std::size_t length);

// x: [in_channels, length], w: [out_channels, in_channels, kernel]
template <typename T>
Var<T> conv1d(Var<T> x, Var<T> w, std::size_t stride);

// x: [in_channels, length], w: [in_channels, out_channels, kernel];
// output length (length - 1) * stride + kernel.
template <typename T>
Var<T> conv_transpose1d(Var<T> x, Var<T> w, std::size_t stride);

template <typename T>
Var<T> softmax(Var<T> a);

template <typename T>
Var<T> sigmoid(Var<T> a);

template <typename T>
Var<T> relu(Var<T> a);

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(kLayerNormEps));

// Inverted dropout; identity on eval graphs. p must lie in [0, 1).
template <typename T>
Var<T> dropout(Var<T> x, double p);

template <typename T>
Var<T> sum(Var<T> a);

template <typename T>
Var<T> mean(Var<T> a);

// Mean of a 2-D tensor along `axis`; the reduced axis is dropped.
template <typename T>
Var<T> mean(Var<T> a, std::size_t axis);

// x: [m, k], wt: [k, n], b: [n] -> x * wt + b
template <typename T>
Var<T> linear(Var<T> x, Var<T> wt, Var<T> b);

}  // namespace avatr::ad
