#pragma once

#include <functional>
#include <span>

#include "avatr/graph.hpp"

namespace avatr::ad {

// Builds a scalar loss on a fresh graph. Must bind every checked tensor with
// Graph::parameter() so analytic gradients land in its grad field.
using LossBuilder = std::function<Var<double>(Graph<double>&)>;

// Max over every element of every parameter of
//   |analytic - numeric| / max(|analytic|, |numeric|, floor)
// with central differences of step h. `floor` keeps exactly-zero gradients
// (e.g. key biases under softmax shift invariance) from turning round-off in
// the numeric estimate into a large relative error. Graphs are built in eval
// mode so dropout is inactive. Parameters are restored on return.
double check_gradients(const LossBuilder& build, std::span<Tensor<double>* const> params, double h,
                       double floor = 1e-8);

}  // namespace avatr::ad
