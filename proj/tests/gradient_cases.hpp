#pragma once

// Finite-difference cases for every autodiff primitive, shared by the unit
// tests and the acceptance binary.

#include <functional>
#include <random>
#include <vector>

#include "avatr/gradcheck.hpp"
#include "avatr/ops.hpp"
#include "test_util.hpp"

namespace avatr::testing {

// Contracts each primitive's output against a fixed random weight so that no
// gradient is degenerate, then runs the finite-difference check.
struct PrimitiveCase {
  const char* name;
  std::function<double(std::mt19937_64&)> check;
};

inline ad::Var<double> weighted_sum(ad::Var<double> y, std::mt19937_64& rng) {
  auto r = y.graph->constant(random_tensor(y.shape(), rng));
  return sum(mul(y, r));
}

template <typename Build>
double check_case(std::vector<ad::Tensor<double>> inputs, std::uint64_t weight_seed, Build build) {
  std::vector<ad::Tensor<double>*> params;
  for (auto& t : inputs) {
    t.requires_grad = true;
    params.push_back(&t);
  }
  return ad::check_gradients(
      [&](ad::Graph<double>& g) {
        std::vector<ad::Var<double>> vars;
        for (auto& t : inputs) vars.push_back(g.parameter(t));
        std::mt19937_64 wr(weight_seed);
        return weighted_sum(build(vars), wr);
      },
      params, 1e-5);
}

inline std::vector<PrimitiveCase> primitive_cases() {
  using V = std::vector<ad::Var<double>>;
  return {
      {"matmul",
       [](std::mt19937_64& rng) {
         const auto m = random_extent(rng, 1, 5), k = random_extent(rng, 1, 5), n = random_extent(rng, 1, 5);
         return check_case({random_tensor({m, k}, rng), random_tensor({k, n}, rng)}, rng(),
                           [](V v) { return matmul(v[0], v[1]); });
       }},
      {"add_broadcast",
       [](std::mt19937_64& rng) {
         const auto m = random_extent(rng, 1, 5), n = random_extent(rng, 1, 5);
         const int mode = static_cast<int>(rng() % 4);
         ad::Shape bs = mode == 0 ? ad::Shape{m, n} : mode == 1 ? ad::Shape{n} : mode == 2 ? ad::Shape{m, 1} : ad::Shape{1};
         return check_case({random_tensor({m, n}, rng), random_tensor(bs, rng)}, rng(),
                           [](V v) { return add(v[0], v[1]); });
       }},
      {"mul_broadcast",
       [](std::mt19937_64& rng) {
         const auto m = random_extent(rng, 1, 5), n = random_extent(rng, 1, 5);
         const int mode = static_cast<int>(rng() % 4);
         ad::Shape bs = mode == 0 ? ad::Shape{m, n} : mode == 1 ? ad::Shape{1, n} : mode == 2 ? ad::Shape{m, 1} : ad::Shape{1};
         return check_case({random_tensor({m, n}, rng), random_tensor(bs, rng)}, rng(),
                           [](V v) { return mul(v[0], v[1]); });
       }},
      {"scalar_mul",
       [](std::mt19937_64& rng) {
         return check_case({random_tensor({3, 4}, rng)}, rng(), [](V v) { return scalar_mul(v[0], -1.7); });
       }},
      {"transpose",
       [](std::mt19937_64& rng) {
         return check_case({random_tensor({random_extent(rng, 1, 5), random_extent(rng, 1, 5)}, rng)}, rng(),
                           [](V v) { return transpose(v[0]); });
       }},
      {"reshape",
       [](std::mt19937_64& rng) {
         return check_case({random_tensor({2, 6}, rng)}, rng(), [](V v) { return reshape(v[0], {3, 4}); });
       }},
      {"concat",
       [](std::mt19937_64& rng) {
         const std::size_t axis = rng() % 2;
         const auto m = random_extent(rng, 1, 4), n = random_extent(rng, 1, 4);
         ad::Shape s2 = axis == 0 ? ad::Shape{random_extent(rng, 1, 3), n} : ad::Shape{m, random_extent(rng, 1, 3)};
         return check_case({random_tensor({m, n}, rng), random_tensor(s2, rng)}, rng(),
                           [axis](V v) { return concat(v, axis); });
       }},
      {"slice",
       [](std::mt19937_64& rng) {
         const std::size_t axis = rng() % 2;
         const auto m = random_extent(rng, 2, 6), n = random_extent(rng, 2, 6);
         const std::size_t ext = axis == 0 ? m : n;
         const std::size_t start = rng() % ext, len = 1 + rng() % (ext - start);
         return check_case({random_tensor({m, n}, rng)}, rng(),
                           [=](V v) { return slice(v[0], axis, start, len); });
       }},
      {"conv1d",
       [](std::mt19937_64& rng) {
         const auto cin = random_extent(rng, 1, 3), cout = random_extent(rng, 1, 3), k = random_extent(rng, 1, 5);
         const auto stride = random_extent(rng, 1, k), len = k + random_extent(rng, 0, 10);
         return check_case({random_tensor({cin, len}, rng), random_tensor({cout, cin, k}, rng)}, rng(),
                           [stride](V v) { return conv1d(v[0], v[1], stride); });
       }},
      {"conv_transpose1d",
       [](std::mt19937_64& rng) {
         const auto cin = random_extent(rng, 1, 3), cout = random_extent(rng, 1, 3), k = random_extent(rng, 1, 5);
         const auto stride = random_extent(rng, 1, k), len = random_extent(rng, 1, 6);
         return check_case({random_tensor({cin, len}, rng), random_tensor({cin, cout, k}, rng)}, rng(),
                           [stride](V v) { return conv_transpose1d(v[0], v[1], stride); });
       }},
      {"softmax",
       [](std::mt19937_64& rng) {
         return check_case({random_tensor({random_extent(rng, 1, 4), random_extent(rng, 1, 6)}, rng, -2, 2)},
                           rng(), [](V v) { return softmax(v[0]); });
       }},
      {"sigmoid",
       [](std::mt19937_64& rng) {
         return check_case({random_tensor({3, 5}, rng, -3, 3)}, rng(), [](V v) { return sigmoid(v[0]); });
       }},
      {"relu",
       [](std::mt19937_64& rng) {
         // Keep inputs away from the kink so the central difference is valid.
         auto t = random_tensor({4, 5}, rng, 0.05, 1.0);
         for (std::size_t i = 0; i < t.size(); ++i)
           if (rng() % 2) t[i] = -t[i];
         return check_case({t}, rng(), [](V v) { return relu(v[0]); });
       }},
      {"layer_norm",
       [](std::mt19937_64& rng) {
         const auto m = random_extent(rng, 1, 4), n = random_extent(rng, 2, 6);
         return check_case({random_tensor({m, n}, rng, -2, 2), random_tensor({n}, rng), random_tensor({n}, rng)},
                           rng(), [](V v) { return layer_norm(v[0], v[1], v[2]); });
       }},
      {"dropout_eval",
       [](std::mt19937_64& rng) {
         return check_case({random_tensor({3, 3}, rng)}, rng(), [](V v) { return dropout(v[0], 0.3); });
       }},
      {"sum",
       [](std::mt19937_64& rng) {
         return check_case({random_tensor({3, 4}, rng)}, rng(), [](V v) { return sum(v[0]); });
       }},
      {"mean",
       [](std::mt19937_64& rng) {
         return check_case({random_tensor({3, 4}, rng)}, rng(), [](V v) { return mean(v[0]); });
       }},
      {"mean_axis",
       [](std::mt19937_64& rng) {
         const std::size_t axis = rng() % 2;
         return check_case({random_tensor({random_extent(rng, 1, 5), random_extent(rng, 1, 5)}, rng)}, rng(),
                           [axis](V v) { return mean(v[0], axis); });
       }},
      {"linear",
       [](std::mt19937_64& rng) {
         const auto m = random_extent(rng, 1, 5), k = random_extent(rng, 1, 5), n = random_extent(rng, 1, 5);
         return check_case({random_tensor({m, k}, rng), random_tensor({k, n}, rng), random_tensor({n}, rng)},
                           rng(), [](V v) { return linear(v[0], v[1], v[2]); });
       }},
  };
}

}  // namespace avatr::testing
