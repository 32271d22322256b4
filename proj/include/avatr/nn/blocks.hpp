#pragma once

// Transformer attention machinery: scaled dot-product and multi-head
// attention, sinusoidal positional encoding, and the post-norm self-attention
// (SAB) and conditional attention (CAB) blocks.

#include <cstdint>
#include <random>
#include <string>

#include "avatr/ops.hpp"

namespace avatr::nn {

using ad::Tensor;
using ad::Var;

// Weight stored input-major ([in, out]) so forward is x * weight + bias.
template <typename T>
struct LinearParams {
  Tensor<T> weight;
  Tensor<T> bias;

  static LinearParams init(std::size_t in, std::size_t out, std::mt19937_64& rng);
  Var<T> operator()(Var<T> x);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;

  static LayerNormParams init(std::size_t width);
  Var<T> operator()(Var<T> x);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
  }
};

// Two linear layers with a ReLU between them.
template <typename T>
struct MlpParams {
  LinearParams<T> hidden;
  LinearParams<T> output;

  static MlpParams init(std::size_t width, std::size_t inner, std::mt19937_64& rng);
  Var<T> operator()(Var<T> x);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    hidden.visit(prefix + ".hidden", f);
    output.visit(prefix + ".output", f);
  }
};

// Q/K/V projections plus the joint output projection of multi-head attention.
template <typename T>
struct AttentionParams {
  LinearParams<T> query;
  LinearParams<T> key;
  LinearParams<T> value;
  LinearParams<T> output;
  std::size_t heads = 1;

  static AttentionParams init(std::size_t width, std::size_t heads, std::mt19937_64& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    query.visit(prefix + ".query", f);
    key.visit(prefix + ".key", f);
    value.visit(prefix + ".value", f);
    output.visit(prefix + ".output", f);
  }
};

struct BlockShape {
  std::size_t width = 256;
  std::size_t heads = 8;
  std::size_t mlp_ratio = 4;
  double dropout = 0.1;
};

template <typename T>
struct SelfAttentionBlock {
  AttentionParams<T> attention;
  LayerNormParams<T> norm1;
  MlpParams<T> mlp;
  LayerNormParams<T> norm2;
  double dropout = 0.0;

  static SelfAttentionBlock init(const BlockShape& shape, std::mt19937_64& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    attention.visit(prefix + ".attn", f);
    norm1.visit(prefix + ".norm1", f);
    mlp.visit(prefix + ".mlp", f);
    norm2.visit(prefix + ".norm2", f);
  }
};

template <typename T>
struct ConditionalAttentionBlock {
  AttentionParams<T> self_attention;
  LayerNormParams<T> norm1;
  AttentionParams<T> cross_attention;
  LayerNormParams<T> norm2;
  MlpParams<T> mlp;
  LayerNormParams<T> norm3;
  double dropout = 0.0;

  static ConditionalAttentionBlock init(const BlockShape& shape, std::mt19937_64& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    self_attention.visit(prefix + ".self_attn", f);
    norm1.visit(prefix + ".norm1", f);
    cross_attention.visit(prefix + ".cross_attn", f);
    norm2.visit(prefix + ".norm2", f);
    mlp.visit(prefix + ".mlp", f);
    norm3.visit(prefix + ".norm3", f);
  }
};

// softmax(q k^T / sqrt(width)) v for q: [N, w], k, v: [M, w].
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v);

// Attention weights alone, [N, M].
template <typename T>
Var<T> attention_weights(Var<T> q, Var<T> k);

// Splits already-projected q, k, v into `heads` contiguous column groups,
// attends per group, concatenates and applies the output projection.
template <typename T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v, std::size_t heads,
                            LinearParams<T>& output);

// Sinusoidal table [frames, width]; width must be even.
template <typename T>
Tensor<T> positional_encoding(std::size_t frames, std::size_t width);

template <typename T>
Var<T> add_positional_encoding(Var<T> x);

// Z -> LN(Z^ + Drop(MLP(Z^))) with Z^ = LN(Z + Drop(MHA(Z, Z, Z))).
template <typename T>
Var<T> self_attention_block(Var<T> z, SelfAttentionBlock<T>& block);

// Self-attention on y whose queries are projected from y + 1 * avatar^T,
// then cross-attention from the result onto z, then the MLP; each stage is
// residual + post layer norm. `avatar` is [width].
template <typename T>
Var<T> conditional_attention_block(Var<T> y, Var<T> z, Var<T> avatar,
                                   ConditionalAttentionBlock<T>& block);

}  // namespace avatr::nn
