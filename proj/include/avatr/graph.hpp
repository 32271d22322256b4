#pragma once

// Define-by-run tape for reverse-mode differentiation.
//
// Every op appends one node after its inputs, so the node list is always in
// topological order and backpropagate() simply walks it backwards.

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "avatr/tensor.hpp"

namespace avatr::ad {

enum class OpKind {
  matmul,
  add,
  mul,
  scalar_mul,
  transpose,
  reshape,
  concat,
  slice,
  conv1d,
  conv_transpose1d,
  softmax,
  sigmoid,
  relu,
  layer_norm,
  dropout,
  mean,
  sum,
  linear,
  custom,
};

std::string_view op_name(OpKind kind);

enum class Mode { eval, train };

template <typename T>
class Graph;

// Lightweight handle to a value on a graph.
template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return graph->value(*this); }
  const Shape& shape() const { return value().shape; }
};

template <typename T>
class Graph {
 public:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    std::size_t output;
    std::function<void(Graph&, const Node&)> backward;
  };
  using BackwardFn = std::function<void(Graph&, const Node&)>;

  explicit Graph(Mode mode = Mode::eval, std::uint64_t dropout_seed = 0)
      : mode_(mode), dropout_rng_(dropout_seed) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return mode_ == Mode::train; }
  std::mt19937_64& dropout_rng() { return dropout_rng_; }

  Var<T> constant(Tensor<T> value) {
    value.requires_grad = false;
    value.grad.reset();
    return push(std::move(value));
  }

  // Leaf whose gradient is kept on the graph (read it back with grad()).
  Var<T> variable(Tensor<T> value) {
    value.requires_grad = true;
    value.grad.reset();
    return push(std::move(value));
  }

  // Leaf bound to an external tensor; backpropagate() adds into its grad.
  // Binding the same tensor twice returns the same handle.
  Var<T> parameter(Tensor<T>& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return {this, it->second};
    Tensor<T> copy(p.shape, p.data, true);
    Var<T> v = push(std::move(copy));
    bound_.emplace(&p, v.id);
    bound_order_.push_back(&p);
    return v;
  }

  Var<T> record(OpKind kind, std::initializer_list<Var<T>> inputs, Tensor<T> out,
                BackwardFn backward) {
    return record(kind, std::vector<Var<T>>(inputs), std::move(out), std::move(backward));
  }

  Var<T> record(OpKind kind, const std::vector<Var<T>>& inputs, Tensor<T> out,
                BackwardFn backward) {
    bool needs = false;
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (const Var<T>& in : inputs) {
      if (in.graph != this) throw Error(std::string(op_name(kind)) + ": input from another graph");
      ids.push_back(in.id);
      needs = needs || values_[in.id].requires_grad;
    }
    out.requires_grad = needs;
    out.grad.reset();
    Var<T> v = push(std::move(out));
    if (needs) nodes_.push_back(Node{kind, std::move(ids), v.id, std::move(backward)});
    return v;
  }

  const Tensor<T>& value(Var<T> v) const { return values_[v.id]; }
  const Tensor<T>& value(std::size_t id) const { return values_[id]; }
  bool requires_grad(std::size_t id) const { return values_[id].requires_grad; }

  // Gradient of a value after backpropagate(); null when nothing flowed into it.
  const std::vector<T>* grad(Var<T> v) const {
    const auto& g = values_[v.id].grad;
    return g ? &*g : nullptr;
  }

  // Output gradient of a node being processed (always allocated).
  const std::vector<T>& out_grad(std::size_t id) const { return *values_[id].grad; }

  // Zero-initialised accumulation buffer for an input gradient.
  std::vector<T>& grad_buffer(std::size_t id) {
    auto& g = values_[id].grad;
    if (!g) g = std::vector<T>(values_[id].data.size(), T(0));
    return *g;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t num_values() const { return values_.size(); }

  void backpropagate(Var<T> loss) {
    if (loss.graph != this) throw Error("backpropagate: loss from another graph");
    if (values_[loss.id].data.size() != 1)
      throw ShapeError("backpropagate: loss must be scalar, got shape " +
                       to_string(values_[loss.id].shape));
    for (auto& v : values_) v.grad.reset();
    if (!values_[loss.id].requires_grad) return;
    values_[loss.id].grad = std::vector<T>{T(1)};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!values_[it->output].grad) continue;
      it->backward(*this, *it);
    }
    for (Tensor<T>* p : bound_order_) {
      const auto& g = values_[bound_.at(p)].grad;
      if (!g) continue;
      if (!p->grad) p->grad = std::vector<T>(p->data.size(), T(0));
      for (std::size_t i = 0; i < g->size(); ++i) (*p->grad)[i] += (*g)[i];
    }
  }

 private:
  Var<T> push(Tensor<T> value) {
    values_.push_back(std::move(value));
    return {this, values_.size() - 1};
  }

  Mode mode_;
  std::mt19937_64 dropout_rng_;
  std::deque<Tensor<T>> values_;
  std::vector<Node> nodes_;
  std::unordered_map<const Tensor<T>*, std::size_t> bound_;
  std::vector<Tensor<T>*> bound_order_;
};

}  // namespace avatr::ad
