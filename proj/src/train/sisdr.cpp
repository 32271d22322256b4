#include "avatr/train/sisdr.hpp"

#include <cmath>
#include <string>

#include "avatr/error.hpp"

namespace avatr::train {

namespace {

// Keeps an all-zero estimate at 0/0-free 0 dB.
constexpr double kFloor = 1e-30;

struct Terms {
  double alpha, signal, error, dot_rs, ss;
};

template <typename A, typename B>
Terms terms(std::span<const A> s, std::span<const B> e) {
  if (s.size() != e.size())
    throw ShapeError("sisdr: length mismatch " + std::to_string(s.size()) + " vs " + std::to_string(e.size()));
  if (s.empty()) throw ShapeError("sisdr: empty signals");
  double ss = 0.0, es = 0.0, ee = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ss += static_cast<double>(s[i]) * s[i];
    es += static_cast<double>(e[i]) * s[i];
    ee += static_cast<double>(e[i]) * e[i];
  }
  if (!(ss > 0.0)) throw DataError("sisdr: target has zero energy");
  Terms t{};
  t.ss = ss;
  t.alpha = es / ss;
  const double cap = kSisdrEps * ee + kFloor;
  double err = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = t.alpha * s[i] - e[i];
    err += r * r;
    dot += r * s[i];
  }
  t.signal = t.alpha * t.alpha * ss + cap;
  t.error = err + cap;
  t.dot_rs = dot;
  return t;
}

}  // namespace

double sisdr(std::span<const double> target, std::span<const double> estimate) {
  const Terms t = terms(target, estimate);
  return 10.0 * std::log10(t.signal / t.error);
}

double sisdr(std::span<const float> target, std::span<const float> estimate) {
  const Terms t = terms(target, estimate);
  return 10.0 * std::log10(t.signal / t.error);
}

template <typename T>
ad::Var<T> sisdr(ad::Var<T> target, ad::Var<T> estimate) {
  if (target.graph != estimate.graph) throw Error("sisdr: inputs from different graphs");
  if (target.graph->requires_grad(target.id)) throw Error("sisdr: target must not require gradients");
  const auto& s = target.value().data;
  const auto& e = estimate.value().data;
  const Terms t = terms(std::span<const T>(s), std::span<const T>(e));
  ad::Tensor<T> out({1}, {static_cast<T>(10.0 * std::log10(t.signal / t.error))});
  return target.graph->record(
      ad::OpKind::custom, {target, estimate}, std::move(out), [t](ad::Graph<T>& g, const auto& node) {
        const auto& s = g.value(node.inputs[0]).data;
        const auto& e = g.value(node.inputs[1]).data;
        const double gy = g.out_grad(node.output)[0];
        auto& ge = g.grad_buffer(node.inputs[1]);
        // d alpha / d e_i = s_i / |s|^2, and both energies carry eps |e|^2.
        const double c = gy * 10.0 / std::log(10.0);
        for (std::size_t i = 0; i < ge.size(); ++i) {
          const double r = t.alpha * s[i] - e[i];
          const double dp = 2.0 * t.alpha * s[i] + 2.0 * kSisdrEps * e[i];
          const double de = 2.0 * (t.dot_rs * s[i] / t.ss - r) + 2.0 * kSisdrEps * e[i];
          ge[i] += static_cast<T>(c * (dp / t.signal - de / t.error));
        }
      });
}

template ad::Var<float> sisdr<float>(ad::Var<float>, ad::Var<float>);
template ad::Var<double> sisdr<double>(ad::Var<double>, ad::Var<double>);

}  // namespace avatr::train
