#pragma once

// AvaTr V1 and V2 speaker-extraction networks.
//
// Both share a single strided conv encoder (waveform -> frames x channels,
// ReLU), a single transposed-conv decoder, and a trainable reference encoder
// producing the avatar. They differ in how the avatar gates the features:
//   V1: frames are scaled by sigmoid(F . avatar), refined by L self-attention
//       blocks into the activation mask.
//   V2: E self-attention blocks contextualise F, then K conditional blocks
//       starting from a zero stream inject the avatar into their queries.
// In both, the mask multiplies the raw encoder output before decoding.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avatr/model/config.hpp"
#include "avatr/nn/blocks.hpp"

namespace avatr::model {

using ad::Graph;
using ad::Tensor;
using ad::Var;

template <typename T>
struct FeatureMap {
  Var<T> frames;  // [N, hidden]
  std::size_t original_length = 0;
};

// Length after right zero-padding so that frames tile the signal exactly.
std::size_t padded_length(std::size_t length, std::size_t kernel, std::size_t stride);
std::size_t frame_count(std::size_t length, std::size_t kernel, std::size_t stride);

// Scales each frame F_i by sigmoid(F_i . avatar).
template <typename T>
Var<T> apply_position_mask(Var<T> features, Var<T> avatar);

template <typename T>
class AvatrModel {
 public:
  AvatrModel(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }

  // x: [1, L] waveform.
  FeatureMap<T> encode_waveform(Var<T> x);
  // Overlap-add decode trimmed to the original length -> [1, L].
  Var<T> decode_features(Var<T> frames, std::size_t original_length);
  // reference: [1, L_ref] -> [hidden].
  Var<T> compute_avatar(Var<T> reference);

  // Mask multiplied into the raw encoder output: V1 refines the
  // position-masked frames, V2 runs the conditional stack from Y0 = 0.
  Var<T> activation_mask(const FeatureMap<T>& features, Var<T> reference);
  // False when the config has no mask-producing blocks (mask == ones).
  bool has_mask() const;

  Var<T> forward(Var<T> mixture, Var<T> reference);
  Var<T> forward(Graph<T>& g, std::span<const float> mixture, std::span<const float> reference);

  // Eval-mode forward returning plain samples.
  std::vector<float> extract(std::span<const float> mixture, std::span<const float> reference);
  std::vector<float> avatar(std::span<const float> reference);

  // Visits every parameter as (name, tensor) in a fixed order.
  template <typename F>
  void visit(F&& f) {
    f(std::string("encoder.weight"), encoder_);
    f(std::string("decoder.weight"), decoder_);
    f(std::string("avatar.encoder.weight"), avatar_encoder_);
    for (std::size_t i = 0; i < avatar_blocks_.size(); ++i)
      avatar_blocks_[i].visit("avatar.sab" + std::to_string(i), f);
    const std::string sab_prefix = config_.variant == Variant::v1 ? "sab" : "encoder_sab";
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit(sab_prefix + std::to_string(i), f);
    for (std::size_t i = 0; i < cabs_.size(); ++i) cabs_[i].visit("cab" + std::to_string(i), f);
  }

  std::vector<Tensor<T>*> parameters();
  std::size_t parameter_count();
  void zero_grad();

  template <typename U>
  AvatrModel<U> cast() const {
    AvatrModel<U> out(config_, 0);
    auto& self = const_cast<AvatrModel&>(*this);
    std::vector<Tensor<T>*> src = self.parameters();
    std::size_t i = 0;
    out.visit([&](const std::string&, Tensor<U>& t) { t = src[i++]->template cast<U>(); });
    return out;
  }

  // Sets encoder/decoder weights so decode(encode(x)) == x. Needs
  // kernel == stride and hidden >= 2 * kernel (a +/- pair per tap).
  void set_identity_codec();

 private:
  FeatureMap<T> encode_with(Var<T> x, Tensor<T>& weight, const char* who);
  Var<T> mask_from(Var<T> raw);

  ModelConfig config_;
  Tensor<T> encoder_;         // [hidden, 1, kernel]
  Tensor<T> decoder_;         // [hidden, 1, kernel]
  Tensor<T> avatar_encoder_;  // [hidden, 1, kernel]
  std::vector<nn::SelfAttentionBlock<T>> avatar_blocks_;
  std::vector<nn::SelfAttentionBlock<T>> blocks_;
  std::vector<nn::ConditionalAttentionBlock<T>> cabs_;
};

}  // namespace avatr::model
