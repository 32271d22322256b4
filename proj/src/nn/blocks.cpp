#include "avatr/nn/blocks.hpp"

#include <cmath>

namespace avatr::nn {

namespace {

template <typename T>
Tensor<T> xavier(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<T> data(in * out);
  for (T& v : data) v = static_cast<T>(u(rng));
  return Tensor<T>({in, out}, std::move(data), true);
}

void check_heads(std::size_t width, std::size_t heads) {
  if (heads == 0 || width % heads != 0)
    throw ConfigError("attention: width " + std::to_string(width) + " not divisible by " +
                      std::to_string(heads) + " heads");
}

}  // namespace

template <typename T>
LinearParams<T> LinearParams<T>::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  LinearParams p;
  p.weight = xavier<T>(in, out, rng);
  p.bias = Tensor<T>::zeros({out});
  p.bias.requires_grad = true;
  return p;
}

template <typename T>
Var<T> LinearParams<T>::operator()(Var<T> x) {
  auto& g = *x.graph;
  return ad::linear(x, g.parameter(weight), g.parameter(bias));
}

template <typename T>
LayerNormParams<T> LayerNormParams<T>::init(std::size_t width) {
  LayerNormParams p;
  p.gamma = Tensor<T>::filled({width}, T(1));
  p.gamma.requires_grad = true;
  p.beta = Tensor<T>::zeros({width});
  p.beta.requires_grad = true;
  return p;
}

template <typename T>
Var<T> LayerNormParams<T>::operator()(Var<T> x) {
  auto& g = *x.graph;
  return ad::layer_norm(x, g.parameter(gamma), g.parameter(beta));
}

template <typename T>
MlpParams<T> MlpParams<T>::init(std::size_t width, std::size_t inner, std::mt19937_64& rng) {
  MlpParams p;
  p.hidden = LinearParams<T>::init(width, inner, rng);
  p.output = LinearParams<T>::init(inner, width, rng);
  return p;
}

template <typename T>
Var<T> MlpParams<T>::operator()(Var<T> x) {
  return output(ad::relu(hidden(x)));
}

template <typename T>
AttentionParams<T> AttentionParams<T>::init(std::size_t width, std::size_t heads,
                                            std::mt19937_64& rng) {
  check_heads(width, heads);
  AttentionParams p;
  p.query = LinearParams<T>::init(width, width, rng);
  p.key = LinearParams<T>::init(width, width, rng);
  p.value = LinearParams<T>::init(width, width, rng);
  p.output = LinearParams<T>::init(width, width, rng);
  p.heads = heads;
  return p;
}

template <typename T>
SelfAttentionBlock<T> SelfAttentionBlock<T>::init(const BlockShape& shape, std::mt19937_64& rng) {
  SelfAttentionBlock b;
  b.attention = AttentionParams<T>::init(shape.width, shape.heads, rng);
  b.norm1 = LayerNormParams<T>::init(shape.width);
  b.mlp = MlpParams<T>::init(shape.width, shape.mlp_ratio * shape.width, rng);
  b.norm2 = LayerNormParams<T>::init(shape.width);
  b.dropout = shape.dropout;
  return b;
}

template <typename T>
ConditionalAttentionBlock<T> ConditionalAttentionBlock<T>::init(const BlockShape& shape,
                                                                std::mt19937_64& rng) {
  ConditionalAttentionBlock b;
  b.self_attention = AttentionParams<T>::init(shape.width, shape.heads, rng);
  b.norm1 = LayerNormParams<T>::init(shape.width);
  b.cross_attention = AttentionParams<T>::init(shape.width, shape.heads, rng);
  b.norm2 = LayerNormParams<T>::init(shape.width);
  b.mlp = MlpParams<T>::init(shape.width, shape.mlp_ratio * shape.width, rng);
  b.norm3 = LayerNormParams<T>::init(shape.width);
  b.dropout = shape.dropout;
  return b;
}

template <typename T>
Var<T> attention_weights(Var<T> q, Var<T> k) {
  const auto& qs = q.shape();
  const auto& ks = k.shape();
  if (qs.size() != 2 || ks.size() != 2 || qs[1] != ks[1])
    throw ShapeError("attention: query " + ad::to_string(qs) + " and key " + ad::to_string(ks) +
                     " widths differ");
  const T scale = T(1) / std::sqrt(static_cast<T>(qs[1]));
  return ad::softmax(ad::scalar_mul(ad::matmul(q, ad::transpose(k)), scale));
}

template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v) {
  const auto& ks = k.shape();
  const auto& vs = v.shape();
  if (vs.size() != 2 || vs[0] != ks[0] || vs[1] != ks[1])
    throw ShapeError("attention: key " + ad::to_string(ks) + " and value " + ad::to_string(vs) +
                     " shapes differ");
  return ad::matmul(attention_weights(q, k), v);
}

template <typename T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v, std::size_t heads,
                            LinearParams<T>& output) {
  const std::size_t width = q.shape().back();
  check_heads(width, heads);
  if (heads == 1) return output(attention(q, k, v));
  const std::size_t group = width / heads;
  std::vector<Var<T>> parts;
  parts.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h)
    parts.push_back(attention(ad::slice(q, 1, h * group, group), ad::slice(k, 1, h * group, group),
                              ad::slice(v, 1, h * group, group)));
  return output(ad::concat(parts, 1));
}

template <typename T>
Tensor<T> positional_encoding(std::size_t frames, std::size_t width) {
  if (frames == 0 || width == 0 || width % 2 != 0)
    throw ConfigError("positional_encoding: width must be even and positive, got " +
                      std::to_string(width));
  Tensor<T> pe = Tensor<T>::zeros({frames, width});
  for (std::size_t pos = 0; pos < frames; ++pos)
    for (std::size_t i = 0; i < width / 2; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(width));
      pe.at(pos, 2 * i) = static_cast<T>(std::sin(angle));
      pe.at(pos, 2 * i + 1) = static_cast<T>(std::cos(angle));
    }
  return pe;
}

template <typename T>
Var<T> add_positional_encoding(Var<T> x) {
  const auto& s = x.shape();
  if (s.size() != 2) throw ShapeError("positional_encoding: expected [frames, width], got " + ad::to_string(s));
  return ad::add(x, x.graph->constant(positional_encoding<T>(s[0], s[1])));
}

template <typename T>
Var<T> self_attention_block(Var<T> z, SelfAttentionBlock<T>& block) {
  auto& a = block.attention;
  if (z.shape().size() != 2 || z.shape()[1] != a.query.weight.shape[0])
    throw ShapeError("self_attention_block: input " + ad::to_string(z.shape()) +
                     " does not match width " + std::to_string(a.query.weight.shape[0]));
  Var<T> attended = multi_head_attention(a.query(z), a.key(z), a.value(z), a.heads, a.output);
  Var<T> zhat = block.norm1(ad::add(z, ad::dropout(attended, block.dropout)));
  return block.norm2(ad::add(zhat, ad::dropout(block.mlp(zhat), block.dropout)));
}

template <typename T>
Var<T> conditional_attention_block(Var<T> y, Var<T> z, Var<T> avatar,
                                   ConditionalAttentionBlock<T>& block) {
  const std::size_t width = block.self_attention.query.weight.shape[0];
  if (y.shape().size() != 2 || y.shape()[1] != width || y.shape() != z.shape())
    throw ShapeError("conditional_attention_block: stream " + ad::to_string(y.shape()) +
                     " and features " + ad::to_string(z.shape()) + " must both be [N, " +
                     std::to_string(width) + "]");
  if (avatar.value().size() != width)
    throw ShapeError("conditional_attention_block: avatar " + ad::to_string(avatar.shape()) +
                     " does not match width " + std::to_string(width));
  auto& sa = block.self_attention;
  Var<T> query = sa.query(ad::add(y, ad::reshape(avatar, {width})));
  Var<T> attended = multi_head_attention(query, sa.key(y), sa.value(y), sa.heads, sa.output);
  Var<T> ytilde = block.norm1(ad::add(y, ad::dropout(attended, block.dropout)));

  auto& ca = block.cross_attention;
  Var<T> crossed = multi_head_attention(ca.query(ytilde), ca.key(z), ca.value(z), ca.heads, ca.output);
  Var<T> yhat = block.norm2(ad::add(ytilde, ad::dropout(crossed, block.dropout)));
  return block.norm3(ad::add(yhat, ad::dropout(block.mlp(yhat), block.dropout)));
}

#define AVATR_INSTANTIATE_BLOCKS(T)                                                        \
  template struct LinearParams<T>;                                                        \
  template struct LayerNormParams<T>;                                                     \
  template struct MlpParams<T>;                                                           \
  template struct AttentionParams<T>;                                                     \
  template struct SelfAttentionBlock<T>;                                                  \
  template struct ConditionalAttentionBlock<T>;                                           \
  template Var<T> attention_weights<T>(Var<T>, Var<T>);                                   \
  template Var<T> attention<T>(Var<T>, Var<T>, Var<T>);                                   \
  template Var<T> multi_head_attention<T>(Var<T>, Var<T>, Var<T>, std::size_t,            \
                                          LinearParams<T>&);                              \
  template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);                    \
  template Var<T> add_positional_encoding<T>(Var<T>);                                     \
  template Var<T> self_attention_block<T>(Var<T>, SelfAttentionBlock<T>&);                \
  template Var<T> conditional_attention_block<T>(Var<T>, Var<T>, Var<T>,                  \
                                                 ConditionalAttentionBlock<T>&);

AVATR_INSTANTIATE_BLOCKS(float)
AVATR_INSTANTIATE_BLOCKS(double)

}  // namespace avatr::nn
