#include "avatr/model/config.hpp"

#include "avatr/config_value.hpp"
#include "avatr/error.hpp"

namespace avatr::model {

std::string_view to_string(Variant v) { return v == Variant::v1 ? "v1" : "v2"; }

std::string_view to_string(MaskNonlinearity m) {
  switch (m) {
    case MaskNonlinearity::sigmoid: return "sigmoid";
    case MaskNonlinearity::relu: return "relu";
    case MaskNonlinearity::none: return "none";
  }
  return "?";
}

namespace {

std::size_t parse_size(std::string_view key, std::string_view v) {
  return config::parse_size("model." + std::string(key), v);
}
double parse_double(std::string_view key, std::string_view v) {
  return config::parse_double("model." + std::string(key), v);
}
bool parse_switch(std::string_view key, std::string_view v) {
  return config::parse_switch("model." + std::string(key), v);
}
using config::format_double;

}  // namespace

std::size_t ModelConfig::resolved_heads() const {
  if (heads != 0) return heads;
  return hidden == 128 ? 4 : 8;
}

void ModelConfig::validate() const {
  if (hidden == 0) throw ConfigError("model.hidden must be positive");
  const std::size_t h = resolved_heads();
  if (hidden % h != 0)
    throw ConfigError("model.hidden=" + std::to_string(hidden) + " not divisible by model.heads=" +
                      std::to_string(h));
  if (positional_encoding && hidden % 2 != 0)
    throw ConfigError("model.hidden must be even when positional encoding is on");
  if (stride < 1 || kernel < stride)
    throw ConfigError("model.kernel >= model.stride >= 1 required");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (mlp_ratio == 0) throw ConfigError("model.mlp_ratio must be positive");
  if (sample_rate <= 0) throw ConfigError("model.sample_rate must be positive");
}

void ModelConfig::set(std::string_view key, std::string_view value) {
  if (key == "variant") {
    if (value == "v1") variant = Variant::v1;
    else if (value == "v2") variant = Variant::v2;
    else throw ConfigError("model.variant: expected v1|v2, got '" + std::string(value) + "'");
  } else if (key == "hidden") {
    hidden = parse_size(key, value);
  } else if (key == "blocks") {
    blocks = parse_size(key, value);
  } else if (key == "encoder_blocks") {
    encoder_blocks = parse_size(key, value);
  } else if (key == "cab_blocks") {
    cab_blocks = parse_size(key, value);
  } else if (key == "avatar_blocks") {
    avatar_blocks = parse_size(key, value);
  } else if (key == "heads") {
    heads = parse_size(key, value);
  } else if (key == "mlp_ratio") {
    mlp_ratio = parse_size(key, value);
  } else if (key == "kernel") {
    kernel = parse_size(key, value);
  } else if (key == "stride") {
    stride = parse_size(key, value);
  } else if (key == "dropout") {
    dropout = parse_double(key, value);
  } else if (key == "mask") {
    if (value == "sigmoid") mask = MaskNonlinearity::sigmoid;
    else if (value == "relu") mask = MaskNonlinearity::relu;
    else if (value == "none") mask = MaskNonlinearity::none;
    else throw ConfigError("model.mask: expected sigmoid|relu|none, got '" + std::string(value) + "'");
  } else if (key == "positional_encoding") {
    positional_encoding = parse_switch(key, value);
  } else if (key == "sample_rate") {
    sample_rate = static_cast<int>(parse_size(key, value));
  } else {
    throw ConfigError("unknown model key '" + std::string(key) + "'");
  }
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_pairs() const {
  return {
      {"variant", std::string(to_string(variant))},
      {"hidden", std::to_string(hidden)},
      {"blocks", std::to_string(blocks)},
      {"encoder_blocks", std::to_string(encoder_blocks)},
      {"cab_blocks", std::to_string(cab_blocks)},
      {"avatar_blocks", std::to_string(avatar_blocks)},
      {"heads", std::to_string(heads)},
      {"mlp_ratio", std::to_string(mlp_ratio)},
      {"kernel", std::to_string(kernel)},
      {"stride", std::to_string(stride)},
      {"dropout", format_double(dropout)},
      {"mask", std::string(to_string(mask))},
      {"positional_encoding", positional_encoding ? "on" : "off"},
      {"sample_rate", std::to_string(sample_rate)},
  };
}

std::string ModelConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_pairs()) out += k + "=" + v + "\n";
  return out;
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig c;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("model config line without '=': " + std::string(line));
    c.set(line.substr(0, eq), line.substr(eq + 1));
  }
  c.validate();
  return c;
}

}  // namespace avatr::model
