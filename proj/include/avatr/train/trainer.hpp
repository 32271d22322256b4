#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "avatr/audio/corpus.hpp"
#include "avatr/model/avatr.hpp"
#include "avatr/train/config.hpp"

namespace avatr::train {

// Mean over the batch of -sisdr(target, model(mixture, reference)).
template <typename T>
ad::Var<T> episodic_loss(ad::Graph<T>& g, model::AvatrModel<T>& model, std::span<const audio::Episode> batch);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate used during this epoch
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  model::AvatrModel<float> best_model;
};

// Called after every epoch with the current model; returning false stops
// training early.
using EpochCallback = std::function<bool(const EpochLog&, model::AvatrModel<float>&)>;

// `initial` replaces the seeded initialisation when given.
TrainResult run_training(const audio::Corpus& corpus, const model::ModelConfig& model_config,
                         const TrainConfig& config, audio::MixtureType mixture,
                         const EpochCallback& on_epoch = {},
                         std::optional<model::AvatrModel<float>> initial = std::nullopt);

// The fixed validation set, identical for every epoch of a run.
std::vector<audio::Episode> validation_episodes(const audio::Corpus& corpus, const TrainConfig& config,
                                                audio::MixtureType mixture);

struct Histogram {
  double low = 0.0;  // left edge of the first 1 dB bin
  std::vector<std::size_t> input_counts, output_counts;
};

struct EvalReport {
  std::vector<double> input_sisdr, output_sisdr;
  double mean = 0.0;            // of output_sisdr
  double standard_error = 0.0;  // of the mean
  double input_mean = 0.0;
  Histogram histogram;

  double improvement() const { return mean - input_mean; }
};

// 1 dB bins covering both lists; throws on empty input.
Histogram sisdr_histogram(std::span<const double> input, std::span<const double> output);
EvalReport make_report(std::vector<double> input_sisdr, std::vector<double> output_sisdr);

// Scores the model on pre-drawn episodes; episodes are independent and are
// run in parallel.
EvalReport score_episodes(model::AvatrModel<float>& model, std::span<const audio::Episode> episodes);

// n_episodes 0 dB episodes from `split`, full-length targets.
EvalReport evaluate(const audio::Corpus& corpus, model::AvatrModel<float>& model, audio::Split split,
                    audio::MixtureType mixture, std::size_t n_episodes, std::uint64_t seed,
                    double reference_seconds);

}  // namespace avatr::train
