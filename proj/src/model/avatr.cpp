#include "avatr/model/avatr.hpp"

#include <cmath>
#include <random>

namespace avatr::model {

std::size_t padded_length(std::size_t length, std::size_t kernel, std::size_t stride) {
  if (length <= kernel) return kernel;
  const std::size_t hops = (length - kernel + stride - 1) / stride;
  return kernel + hops * stride;
}

std::size_t frame_count(std::size_t length, std::size_t kernel, std::size_t stride) {
  return 1 + (padded_length(length, kernel, stride) - kernel) / stride;
}

namespace {

template <typename T>
Tensor<T> conv_weight(std::size_t channels, std::size_t kernel, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<T> data(channels * kernel);
  for (T& v : data) v = static_cast<T>(u(rng));
  return Tensor<T>({channels, 1, kernel}, std::move(data), true);
}

template <typename T>
Var<T> waveform_var(Graph<T>& g, std::span<const float> samples) {
  if (samples.empty()) throw DataError("waveform is empty");
  std::vector<T> data(samples.begin(), samples.end());
  return g.constant(Tensor<T>({1, samples.size()}, std::move(data)));
}

}  // namespace

template <typename T>
Var<T> apply_position_mask(Var<T> features, Var<T> avatar) {
  const auto& fs = features.shape();
  if (fs.size() != 2 || avatar.value().size() != fs[1])
    throw ShapeError("apply_position_mask: features " + ad::to_string(fs) + " vs avatar " +
                     ad::to_string(avatar.shape()));
  Var<T> gate = ad::sigmoid(ad::matmul(features, ad::reshape(avatar, {fs[1], 1})));
  return ad::mul(features, gate);
}

template <typename T>
AvatrModel<T>::AvatrModel(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(init_seed);
  const std::size_t d = config_.hidden, k = config_.kernel;
  const nn::BlockShape shape{d, config_.resolved_heads(), config_.mlp_ratio, config_.dropout};
  encoder_ = conv_weight<T>(d, k, 1.0 / std::sqrt(static_cast<double>(k)), rng);
  decoder_ = conv_weight<T>(d, k, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  avatar_encoder_ = conv_weight<T>(d, k, 1.0 / std::sqrt(static_cast<double>(k)), rng);
  for (std::size_t i = 0; i < config_.avatar_blocks; ++i)
    avatar_blocks_.push_back(nn::SelfAttentionBlock<T>::init(shape, rng));
  const std::size_t sabs = config_.variant == Variant::v1 ? config_.blocks : config_.encoder_blocks;
  for (std::size_t i = 0; i < sabs; ++i) blocks_.push_back(nn::SelfAttentionBlock<T>::init(shape, rng));
  if (config_.variant == Variant::v2)
    for (std::size_t i = 0; i < config_.cab_blocks; ++i)
      cabs_.push_back(nn::ConditionalAttentionBlock<T>::init(shape, rng));
}

template <typename T>
FeatureMap<T> AvatrModel<T>::encode_with(Var<T> x, Tensor<T>& weight, const char* who) {
  const auto& xs = x.shape();
  if (xs.size() != 2 || xs[0] != 1) throw ShapeError(std::string(who) + ": expected [1, L], got " + ad::to_string(xs));
  const std::size_t len = xs[1];
  const std::size_t padded = padded_length(len, config_.kernel, config_.stride);
  Var<T> input = x;
  if (padded > len)
    input = ad::concat<T>({x, x.graph->constant(Tensor<T>::zeros({1, padded - len}))}, 1);
  Var<T> frames = ad::conv1d(input, x.graph->parameter(weight), config_.stride);
  return {ad::relu(ad::transpose(frames)), len};
}

template <typename T>
FeatureMap<T> AvatrModel<T>::encode_waveform(Var<T> x) {
  return encode_with(x, encoder_, "encode_waveform");
}

template <typename T>
Var<T> AvatrModel<T>::decode_features(Var<T> frames, std::size_t original_length) {
  const auto& fs = frames.shape();
  if (fs.size() != 2 || fs[1] != config_.hidden)
    throw ShapeError("decode_features: expected [N, " + std::to_string(config_.hidden) + "], got " +
                     ad::to_string(fs));
  const std::size_t span = (fs[0] - 1) * config_.stride + config_.kernel;
  if (original_length == 0 || padded_length(original_length, config_.kernel, config_.stride) != span)
    throw ShapeError("decode_features: original length " + std::to_string(original_length) +
                     " inconsistent with " + std::to_string(fs[0]) + " frames");
  Var<T> wave = ad::conv_transpose1d(ad::transpose(frames), frames.graph->parameter(decoder_), config_.stride);
  if (original_length == span) return wave;
  return ad::slice(wave, 1, 0, original_length);
}

template <typename T>
Var<T> AvatrModel<T>::compute_avatar(Var<T> reference) {
  const auto& rs = reference.shape();
  if (rs.size() != 2 || rs[0] != 1) throw ShapeError("compute_avatar: expected [1, L], got " + ad::to_string(rs));
  if (rs[1] < config_.kernel)
    throw DataError("compute_avatar: reference of " + std::to_string(rs[1]) +
                    " samples is shorter than one window of " + std::to_string(config_.kernel));
  Var<T> z = encode_with(reference, avatar_encoder_, "compute_avatar").frames;
  for (auto& block : avatar_blocks_) z = nn::self_attention_block(z, block);
  return ad::mean(z, 0);
}

template <typename T>
Var<T> AvatrModel<T>::mask_from(Var<T> raw) {
  switch (config_.mask) {
    case MaskNonlinearity::sigmoid: return ad::sigmoid(raw);
    case MaskNonlinearity::relu: return ad::relu(raw);
    case MaskNonlinearity::none: return raw;
  }
  return raw;
}

template <typename T>
Var<T> AvatrModel<T>::activation_mask(const FeatureMap<T>& features, Var<T> reference) {
  Var<T> avatar = compute_avatar(reference);
  if (config_.variant == Variant::v1) {
    Var<T> x = apply_position_mask(features.frames, avatar);
    if (config_.positional_encoding) x = nn::add_positional_encoding(x);
    for (auto& block : blocks_) x = nn::self_attention_block(x, block);
    return mask_from(x);
  }
  Var<T> feature = features.frames;
  if (config_.positional_encoding) feature = nn::add_positional_encoding(feature);
  for (auto& block : blocks_) feature = nn::self_attention_block(feature, block);
  // Y0 is zero; its positional code is the only thing that tells decoder rows apart.
  Var<T> y = features.frames.graph->constant(Tensor<T>::zeros(features.frames.shape()));
  if (config_.positional_encoding) y = nn::add_positional_encoding(y);
  for (auto& cab : cabs_) y = nn::conditional_attention_block(y, feature, avatar, cab);
  return mask_from(y);
}

template <typename T>
bool AvatrModel<T>::has_mask() const {
  return config_.variant == Variant::v1 ? !blocks_.empty() : !cabs_.empty();
}

template <typename T>
Var<T> AvatrModel<T>::forward(Var<T> mixture, Var<T> reference) {
  FeatureMap<T> f = encode_waveform(mixture);
  // No mask-producing blocks: the mask is all ones and the model is encode -> decode.
  if (!has_mask()) return decode_features(f.frames, f.original_length);
  Var<T> mask = activation_mask(f, reference);
  return decode_features(ad::mul(f.frames, mask), f.original_length);
}

template <typename T>
Var<T> AvatrModel<T>::forward(Graph<T>& g, std::span<const float> mixture, std::span<const float> reference) {
  return forward(waveform_var(g, mixture), waveform_var(g, reference));
}

template <typename T>
std::vector<float> AvatrModel<T>::extract(std::span<const float> mixture, std::span<const float> reference) {
  Graph<T> g(ad::Mode::eval);
  const auto& out = forward(g, mixture, reference).value().data;
  return std::vector<float>(out.begin(), out.end());
}

template <typename T>
std::vector<float> AvatrModel<T>::avatar(std::span<const float> reference) {
  Graph<T> g(ad::Mode::eval);
  const auto& out = compute_avatar(waveform_var(g, reference)).value().data;
  return std::vector<float>(out.begin(), out.end());
}

template <typename T>
std::vector<Tensor<T>*> AvatrModel<T>::parameters() {
  std::vector<Tensor<T>*> out;
  visit([&](const std::string&, Tensor<T>& t) { out.push_back(&t); });
  return out;
}

template <typename T>
std::size_t AvatrModel<T>::parameter_count() {
  std::size_t n = 0;
  visit([&](const std::string&, Tensor<T>& t) { n += t.size(); });
  return n;
}

template <typename T>
void AvatrModel<T>::zero_grad() {
  visit([](const std::string&, Tensor<T>& t) { t.zero_grad(); });
}

template <typename T>
void AvatrModel<T>::set_identity_codec() {
  const std::size_t k = config_.kernel, d = config_.hidden;
  if (config_.stride != k || d < 2 * k)
    throw ConfigError("identity codec needs kernel == stride and hidden >= 2 * kernel");
  std::fill(encoder_.data.begin(), encoder_.data.end(), T(0));
  std::fill(decoder_.data.begin(), decoder_.data.end(), T(0));
  // relu(x) - relu(-x) == x, one channel pair per tap.
  for (std::size_t tap = 0; tap < k; ++tap) {
    encoder_.data[(2 * tap) * k + tap] = T(1);
    encoder_.data[(2 * tap + 1) * k + tap] = T(-1);
    decoder_.data[(2 * tap) * k + tap] = T(1);
    decoder_.data[(2 * tap + 1) * k + tap] = T(-1);
  }
}

template Var<float> apply_position_mask<float>(Var<float>, Var<float>);
template Var<double> apply_position_mask<double>(Var<double>, Var<double>);
template class AvatrModel<float>;
template class AvatrModel<double>;

}  // namespace avatr::model
