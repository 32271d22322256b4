#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace avatr::model {

enum class Variant { v1, v2 };
enum class MaskNonlinearity { sigmoid, relu, none };

std::string_view to_string(Variant v);
std::string_view to_string(MaskNonlinearity m);

struct ModelConfig {
  Variant variant = Variant::v1;
  std::size_t hidden = 256;
  // Mask-estimating self-attention blocks of V1.
  std::size_t blocks = 5;
  // V2: self-attention blocks on the mixture features, then conditional blocks.
  std::size_t encoder_blocks = 4;
  std::size_t cab_blocks = 4;
  // Self-attention blocks inside the reference embedding function.
  std::size_t avatar_blocks = 2;
  // 0 selects the default: 4 heads at hidden 128, otherwise 8.
  std::size_t heads = 0;
  std::size_t mlp_ratio = 4;
  std::size_t kernel = 16;
  std::size_t stride = 8;
  double dropout = 0.1;
  MaskNonlinearity mask = MaskNonlinearity::sigmoid;
  bool positional_encoding = true;
  int sample_rate = 16000;

  std::size_t resolved_heads() const;
  void validate() const;

  // Assigns one field from its text form; unknown keys throw ConfigError.
  void set(std::string_view key, std::string_view value);
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace avatr::model
