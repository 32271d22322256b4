#include "avatr/train/optim.hpp"

#include <algorithm>
#include <cmath>

#include "avatr/error.hpp"

namespace avatr::train {

template <typename T>
void adam_step(std::span<ad::Tensor<T>* const> params, AdamState& state, double lr, const AdamOptions& o) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
      state.t.push_back(0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state holds a different parameter count");
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Tensor<T>& p = *params[k];
    if (state.m[k].size() != p.size()) throw ShapeError("adam_step: state/parameter size mismatch for " + ad::to_string(p.shape));
    if (!p.grad) continue;
    const auto& g = *p.grad;
    if (g.size() != p.size()) throw ShapeError("adam_step: gradient/parameter size mismatch");
    if (std::all_of(g.begin(), g.end(), [](T x) { return x == T(0); })) continue;
    const std::size_t t = ++state.t[k];
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * gi;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * gi * gi;
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      p.data[i] = static_cast<T>(p.data[i] - lr * mhat / (std::sqrt(vhat) + o.eps));
    }
  }
}

template <typename T>
double clip_grad_norm(std::span<ad::Tensor<T>* const> params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params)
    if (p->grad)
      for (T g : *p->grad) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto* p : params)
      if (p->grad)
        for (T& g : *p->grad) g = static_cast<T>(g * scale);
  }
  return norm;
}

PlateauScheduler::PlateauScheduler(double lr, PlateauOptions options) : lr_(lr), options_(options) {
  if (!(lr > 0.0)) throw ConfigError("scheduler: learning rate must be positive");
  if (!(options.factor > 0.0 && options.factor < 1.0)) throw ConfigError("scheduler: factor must be in (0, 1)");
  if (options.patience == 0) throw ConfigError("scheduler: patience must be at least 1");
}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best_ - options_.min_delta) {
    best_ = val_loss;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= options_.patience) {
    lr_ = std::max(lr_ * options_.factor, options_.floor);
    bad_epochs_ = 0;
  }
  return lr_;
}

template void adam_step<float>(std::span<ad::Tensor<float>* const>, AdamState&, double, const AdamOptions&);
template void adam_step<double>(std::span<ad::Tensor<double>* const>, AdamState&, double, const AdamOptions&);
template double clip_grad_norm<float>(std::span<ad::Tensor<float>* const>, double);
template double clip_grad_norm<double>(std::span<ad::Tensor<double>* const>, double);

}  // namespace avatr::train
