#pragma once

#include <span>

#include "avatr/graph.hpp"

namespace avatr::train {

inline constexpr double kSisdrEps = 1e-8;

// alpha = <s_hat, s> / <s, s>   (the target must have nonzero energy)
// sisdr = 10 log10((|alpha s|^2 + c) / (|alpha s - s_hat|^2 + c)),  c = eps |s_hat|^2
// Tying c to the estimate energy keeps both scale invariances exact and caps
// perfect reconstruction at 10 log10((1 + eps) / eps), just above 80 dB.
double sisdr(std::span<const double> target, std::span<const double> estimate);
double sisdr(std::span<const float> target, std::span<const float> estimate);

// Differentiable in the estimate; the target must be a constant.
template <typename T>
ad::Var<T> sisdr(ad::Var<T> target, ad::Var<T> estimate);

}  // namespace avatr::train
