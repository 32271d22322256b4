#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "avatr/error.hpp"

namespace avatr::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major array. `grad`, when present, always matches `data` in size.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::optional<std::vector<T>> grad;

  Tensor() = default;

  Tensor(Shape s, std::vector<T> values, bool needs_grad = false)
      : shape(std::move(s)), data(std::move(values)), requires_grad(needs_grad) {
    if (shape.empty()) throw ShapeError("tensor: empty shape");
    for (std::size_t e : shape)
      if (e == 0) throw ShapeError("tensor: zero extent in shape " + to_string(shape));
    if (numel(shape) != data.size())
      throw ShapeError("tensor: shape " + to_string(shape) + " does not hold " +
                       std::to_string(data.size()) + " elements");
  }

  static Tensor zeros(Shape s) {
    const std::size_t n = numel(s);
    return Tensor(std::move(s), std::vector<T>(n, T(0)));
  }

  static Tensor filled(Shape s, T value) {
    const std::size_t n = numel(s);
    return Tensor(std::move(s), std::vector<T>(n, value));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  // Extent of the last axis; every leading axis is folded into rows().
  std::size_t cols() const { return shape.back(); }
  std::size_t rows() const { return data.size() / shape.back(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  void zero_grad() {
    if (requires_grad) grad = std::vector<T>(data.size(), T(0));
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    out.requires_grad = requires_grad;
    if (grad) out.grad = std::vector<U>(grad->begin(), grad->end());
    return out;
  }
};

}  // namespace avatr::ad
