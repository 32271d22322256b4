#include "avatr/train/config.hpp"

#include "avatr/config_value.hpp"
#include "avatr/error.hpp"

namespace avatr::train {

using config::format_double;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (episodes_per_epoch < 1) throw ConfigError("train.episodes_per_epoch must be at least 1");
  if (val_episodes < 1) throw ConfigError("train.val_episodes must be at least 1");
  if (plateau_patience < 1) throw ConfigError("train.plateau_patience must be at least 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ConfigError("train.plateau_factor must be in (0, 1)");
  if (min_delta < 0.0) throw ConfigError("train.min_delta must be non-negative");
  if (!(lr_floor > 0.0)) throw ConfigError("train.lr_floor must be positive");
  if (grad_clip < 0.0) throw ConfigError("train.grad_clip must be non-negative");
  if (!(clip_seconds > 0.0) || !(reference_seconds > 0.0) || val_seconds < 0.0)
    throw ConfigError("train.*_seconds must be positive");
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  const std::string k = "train." + std::string(key);
  if (key == "lr") lr = config::parse_double(k, value);
  else if (key == "batch_size") batch_size = config::parse_size(k, value);
  else if (key == "max_epochs") max_epochs = config::parse_size(k, value);
  else if (key == "episodes_per_epoch") episodes_per_epoch = config::parse_size(k, value);
  else if (key == "val_episodes") val_episodes = config::parse_size(k, value);
  else if (key == "plateau_patience") plateau_patience = config::parse_size(k, value);
  else if (key == "plateau_factor") plateau_factor = config::parse_double(k, value);
  else if (key == "min_delta") min_delta = config::parse_double(k, value);
  else if (key == "lr_floor") lr_floor = config::parse_double(k, value);
  else if (key == "grad_clip") grad_clip = config::parse_double(k, value);
  else if (key == "seed") seed = config::parse_u64(k, value);
  else if (key == "clip_seconds") clip_seconds = config::parse_double(k, value);
  else if (key == "reference_seconds") reference_seconds = config::parse_double(k, value);
  else if (key == "val_seconds") val_seconds = config::parse_double(k, value);
  else if (key == "eval_episodes") eval_episodes = config::parse_size(k, value);
  else throw ConfigError("unknown train key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_pairs() const {
  return {
      {"lr", format_double(lr)},
      {"batch_size", std::to_string(batch_size)},
      {"max_epochs", std::to_string(max_epochs)},
      {"episodes_per_epoch", std::to_string(episodes_per_epoch)},
      {"val_episodes", std::to_string(val_episodes)},
      {"plateau_patience", std::to_string(plateau_patience)},
      {"plateau_factor", format_double(plateau_factor)},
      {"min_delta", format_double(min_delta)},
      {"lr_floor", format_double(lr_floor)},
      {"grad_clip", format_double(grad_clip)},
      {"seed", std::to_string(seed)},
      {"clip_seconds", format_double(clip_seconds)},
      {"reference_seconds", format_double(reference_seconds)},
      {"val_seconds", format_double(val_seconds)},
      {"eval_episodes", std::to_string(eval_episodes)},
  };
}

void DataConfig::set(std::string_view key, std::string_view value) {
  if (key == "manifest") manifest = std::string(value);
  else if (key == "regime") regime = audio::parse_regime(value);
  else if (key == "mixture") mixture = audio::parse_mixture(value);
  else throw ConfigError("unknown data key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> DataConfig::to_pairs() const {
  return {
      {"manifest", manifest},
      {"regime", std::string(audio::to_string(regime))},
      {"mixture", std::string(audio::to_string(mixture))},
  };
}

}  // namespace avatr::train
