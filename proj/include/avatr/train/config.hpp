#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avatr/audio/corpus.hpp"

namespace avatr::train {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 500;
  // Online-mixed training episodes drawn per epoch.
  std::size_t episodes_per_epoch = 512;
  // Fixed 0 dB validation episodes, regenerated identically every epoch.
  std::size_t val_episodes = 64;
  std::size_t plateau_patience = 10;
  double plateau_factor = 0.5;
  double min_delta = 1e-4;
  double lr_floor = 1e-7;
  // Global-norm clip before each step; 0 disables.
  double grad_clip = 5.0;
  std::uint64_t seed = 0;
  double clip_seconds = 3.0;
  double reference_seconds = 2.0;
  // 0 scores validation on full-length clips.
  double val_seconds = 0.0;
  std::size_t eval_episodes = 100;

  void validate() const;
  // Key without the "train." prefix.
  void set(std::string_view key, std::string_view value);
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

struct DataConfig {
  std::string manifest;
  audio::Regime regime = audio::Regime::closed;
  audio::MixtureType mixture = audio::MixtureType::speech_speech;

  void set(std::string_view key, std::string_view value);
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

}  // namespace avatr::train
