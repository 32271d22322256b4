#include "avatr/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "avatr/error.hpp"
#include "avatr/ops.hpp"
#include "avatr/random.hpp"
#include "avatr/train/optim.hpp"
#include "avatr/train/sisdr.hpp"

namespace avatr::train {

using audio::Episode;
using model::AvatrModel;

namespace {

template <typename T>
ad::Var<T> wave(ad::Graph<T>& g, const std::vector<float>& x) {
  return g.constant(ad::Tensor<T>({1, x.size()}, std::vector<T>(x.begin(), x.end())));
}

std::size_t samples_for(double seconds, int rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

}  // namespace

template <typename T>
ad::Var<T> episodic_loss(ad::Graph<T>& g, AvatrModel<T>& model, std::span<const Episode> batch) {
  if (batch.empty()) throw DataError("episodic_loss: empty batch");
  std::vector<ad::Var<T>> terms;
  for (const Episode& e : batch) {
    auto out = model.forward(wave(g, e.mixture), wave(g, e.reference));
    terms.push_back(sisdr(wave(g, e.target), out));
  }
  return ad::scalar_mul(ad::sum(ad::concat(terms, 0)), static_cast<T>(-1.0 / batch.size()));
}

std::vector<Episode> validation_episodes(const audio::Corpus& corpus, const TrainConfig& config,
                                         audio::MixtureType mixture) {
  audio::EpisodeOptions o;
  o.split = audio::Split::val;
  o.mixture = mixture;
  o.training = false;
  o.target_samples = samples_for(config.val_seconds, corpus.sample_rate());
  o.reference_samples = samples_for(config.reference_seconds, corpus.sample_rate());
  std::vector<Episode> out;
  for (std::size_t i = 0; i < config.val_episodes; ++i) {
    auto rng = substream(config.seed, "val", i);
    out.push_back(audio::sample_episode(corpus, rng, o));
  }
  return out;
}

TrainResult run_training(const audio::Corpus& corpus, const model::ModelConfig& model_config,
                         const TrainConfig& config, audio::MixtureType mixture, const EpochCallback& on_epoch,
                         std::optional<AvatrModel<float>> initial) {
  config.validate();
  model_config.validate();
  if (model_config.sample_rate != corpus.sample_rate())
    throw ConfigError("model.sample_rate=" + std::to_string(model_config.sample_rate) + " but corpus is at " +
                      std::to_string(corpus.sample_rate()) + " Hz");
  AvatrModel<float> model = initial ? std::move(*initial)
                                    : AvatrModel<float>(model_config, substream(config.seed, "init")());
  if (!(model.config() == model_config)) throw ConfigError("run_training: initial model has a different config");
  std::vector<ad::Tensor<float>*> params = model.parameters();
  const std::vector<Episode> val = validation_episodes(corpus, config, mixture);

  audio::EpisodeOptions train_options;
  train_options.split = audio::Split::train;
  train_options.mixture = mixture;
  train_options.training = true;
  train_options.target_samples = samples_for(config.clip_seconds, corpus.sample_rate());
  train_options.reference_samples = samples_for(config.reference_seconds, corpus.sample_rate());

  AdamState adam;
  PlateauScheduler scheduler(config.lr, {config.plateau_patience, config.plateau_factor, config.min_delta,
                                         config.lr_floor});
  double lr = config.lr;
  std::vector<std::vector<float>> best;
  std::size_t best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<EpochLog> log;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < config.episodes_per_epoch; start += config.batch_size) {
      const std::size_t size = std::min(config.batch_size, config.episodes_per_epoch - start);
      model.zero_grad();
      for (std::size_t j = 0; j < size; ++j) {
        const std::uint64_t index = (epoch - 1) * config.episodes_per_epoch + start + j;
        auto rng = substream(config.seed, "episodes", index);
        const Episode e = audio::sample_episode(corpus, rng, train_options);
        // One graph per episode keeps memory flat; scaling by 1/size makes the
        // accumulated gradient that of the batch mean.
        ad::Graph<float> g(ad::Mode::train, substream(config.seed, "dropout", index)());
        auto out = model.forward(g, e.mixture, e.reference);
        auto loss = ad::scalar_mul(sisdr(wave(g, e.target), out), -1.0f / static_cast<float>(size));
        const double value = loss.value().data[0];
        if (!std::isfinite(value))
          throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(start / config.batch_size) + " (seed " + std::to_string(config.seed) +
                               ", episode index " + std::to_string(index) + ")");
        g.backpropagate(loss);
        loss_sum += value * static_cast<double>(size);
      }
      clip_grad_norm<float>(params, config.grad_clip);
      adam_step<float>(params, adam, lr);
    }
    const double val_loss = -score_episodes(model, val).mean;
    if (!std::isfinite(val_loss))
      throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    EpochLog row{epoch, loss_sum / static_cast<double>(config.episodes_per_epoch), val_loss, lr};
    log.push_back(row);
    if (val_loss < best_val) {
      best_val = val_loss;
      best_epoch = epoch;
      best.clear();
      for (const auto* p : params) best.push_back(p->data);
    }
    lr = scheduler.step(val_loss);
    if (on_epoch && !on_epoch(row, model)) break;
  }

  AvatrModel<float> best_model(model_config, 0);
  auto dst = best_model.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->data = best.empty() ? params[i]->data : best[i];
  return TrainResult{std::move(log), best_epoch, best_val, std::move(best_model)};
}

Histogram sisdr_histogram(std::span<const double> input, std::span<const double> output) {
  if (input.empty() && output.empty()) throw DataError("histogram: no values");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto list : {input, output})
    for (double v : list) {
      if (!std::isfinite(v)) throw NumericalError("histogram: non-finite SISDR value");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  Histogram h;
  h.low = std::floor(lo);
  const auto bins = static_cast<std::size_t>(std::floor(hi) - h.low) + 1;
  h.input_counts.assign(bins, 0);
  h.output_counts.assign(bins, 0);
  auto bin = [&](double v) { return std::min(bins - 1, static_cast<std::size_t>(std::floor(v - h.low))); };
  for (double v : input) ++h.input_counts[bin(v)];
  for (double v : output) ++h.output_counts[bin(v)];
  return h;
}

EvalReport make_report(std::vector<double> input_sisdr, std::vector<double> output_sisdr) {
  if (output_sisdr.empty() || input_sisdr.size() != output_sisdr.size())
    throw DataError("report: need equally many (>0) input and output scores");
  EvalReport r;
  const double n = static_cast<double>(output_sisdr.size());
  r.mean = std::accumulate(output_sisdr.begin(), output_sisdr.end(), 0.0) / n;
  r.input_mean = std::accumulate(input_sisdr.begin(), input_sisdr.end(), 0.0) / n;
  if (output_sisdr.size() > 1) {
    double ss = 0.0;
    for (double v : output_sisdr) ss += (v - r.mean) * (v - r.mean);
    r.standard_error = std::sqrt(ss / (n - 1.0) / n);
  }
  r.histogram = sisdr_histogram(input_sisdr, output_sisdr);
  r.input_sisdr = std::move(input_sisdr);
  r.output_sisdr = std::move(output_sisdr);
  return r;
}

EvalReport score_episodes(AvatrModel<float>& model, std::span<const Episode> episodes) {
  std::vector<double> in(episodes.size()), out(episodes.size());
  bool failed = false;
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    try {
      const Episode& e = episodes[i];
      in[i] = sisdr(std::span<const float>(e.target), std::span<const float>(e.mixture));
      out[i] = sisdr(std::span<const float>(e.target), std::span<const float>(model.extract(e.mixture, e.reference)));
    } catch (const std::exception& ex) {
#pragma omp critical
      {
        failed = true;
        failure = ex.what();
      }
    }
  }
  if (failed) throw DataError("scoring failed: " + failure);
  return make_report(std::move(in), std::move(out));
}

EvalReport evaluate(const audio::Corpus& corpus, AvatrModel<float>& model, audio::Split split,
                    audio::MixtureType mixture, std::size_t n_episodes, std::uint64_t seed,
                    double reference_seconds) {
  if (model.config().sample_rate != corpus.sample_rate())
    throw ConfigError("checkpoint expects " + std::to_string(model.config().sample_rate) + " Hz, corpus is " +
                      std::to_string(corpus.sample_rate()) + " Hz");
  if (n_episodes == 0) throw ConfigError("evaluate: need at least one episode");
  audio::EpisodeOptions o;
  o.split = split;
  o.mixture = mixture;
  o.training = false;
  o.reference_samples = samples_for(reference_seconds, corpus.sample_rate());
  std::vector<Episode> episodes;
  for (std::size_t i = 0; i < n_episodes; ++i) {
    auto rng = substream(seed, "eval", i);
    episodes.push_back(audio::sample_episode(corpus, rng, o));
  }
  return score_episodes(model, episodes);
}

template ad::Var<float> episodic_loss<float>(ad::Graph<float>&, AvatrModel<float>&, std::span<const Episode>);
template ad::Var<double> episodic_loss<double>(ad::Graph<double>&, AvatrModel<double>&, std::span<const Episode>);

}  // namespace avatr::train
