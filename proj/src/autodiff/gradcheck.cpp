#include "avatr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace avatr::ad {

namespace {

double evaluate(const LossBuilder& build) {
  Graph<double> g(Mode::eval);
  return build(g).value().data.at(0);
}

}  // namespace

double check_gradients(const LossBuilder& build, std::span<Tensor<double>* const> params,
                       double h, double floor) {
  if (!(h > 0.0)) throw ConfigError("check_gradients: step must be positive");
  for (Tensor<double>* p : params) p->grad = std::vector<double>(p->size(), 0.0);
  {
    Graph<double> g(Mode::eval);
    Var<double> loss = build(g);
    g.backpropagate(loss);
  }
  double worst = 0.0;
  for (Tensor<double>* p : params) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = p->data[i];
      p->data[i] = saved + h;
      const double up = evaluate(build);
      p->data[i] = saved - h;
      const double down = evaluate(build);
      p->data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = (*p->grad)[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace avatr::ad
