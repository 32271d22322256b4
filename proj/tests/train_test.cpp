#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "avatr/audio/synth.hpp"
#include "avatr/error.hpp"
#include "avatr/gradcheck.hpp"
#include "avatr/model/checkpoint.hpp"
#include "avatr/ops.hpp"
#include "avatr/random.hpp"
#include "avatr/train/optim.hpp"
#include "avatr/train/sisdr.hpp"
#include "avatr/train/trainer.hpp"
#include "test_util.hpp"

namespace {

using namespace avatr;
using namespace avatr::train;
using ad::Graph;
using ad::Tensor;

std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> out(n);
  for (double& v : out) v = g(rng);
  return out;
}

// Direct evaluation in long double, c = 1e-8 |e|^2.
long double sisdr_oracle(const std::vector<double>& s, const std::vector<double>& e) {
  long double ss = 0, es = 0, ee = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    ss += (long double)s[i] * s[i], es += (long double)e[i] * s[i], ee += (long double)e[i] * e[i];
  const long double a = es / ss;
  long double err = 0;
  for (std::size_t i = 0; i < s.size(); ++i) err += (a * s[i] - e[i]) * (a * s[i] - e[i]);
  const long double c = 1e-8L * ee;
  return 10.0L * std::log10((a * a * ss + c) / (err + c));
}

TEST(SisdrTest, HandExampleIsZeroDb) {
  EXPECT_NEAR(sisdr(std::vector<double>{1, 0}, std::vector<double>{1, 1}), 0.0, 1e-9);
}

TEST(SisdrTest, MatchesOracle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto s = gaussian(50, rng), e = gaussian(50, rng);
    EXPECT_NEAR(sisdr(s, e), static_cast<double>(sisdr_oracle(s, e)), 1e-9);
  }
}

TEST(SisdrTest, PerfectReconstructionIsCapped) {
  std::mt19937_64 rng(2);
  auto s = gaussian(256, rng);
  const double p = std::sqrt(std::inner_product(s.begin(), s.end(), s.begin(), 0.0) / s.size());
  for (double& v : s) v /= p;
  const double ref = sisdr(s, s);
  EXPECT_GE(ref, 80.0);
  EXPECT_NEAR(ref, 10.0 * std::log10((1.0 + 1e-8) / 1e-8), 1e-6);
  for (double c : {0.5, 2.0, 7.0}) {
    std::vector<double> scaled(s);
    for (double& v : scaled) v *= c;
    EXPECT_NEAR(sisdr(s, scaled), ref, 1e-6);
  }
}

TEST(SisdrTest, ScaleInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> c(0.1, 10.0);
  for (int i = 0; i < 200; ++i) {
    const auto s = gaussian(64, rng), e = gaussian(64, rng);
    const double base = sisdr(s, e);
    auto s2 = s, e2 = e;
    const double a = c(rng), b = c(rng);
    for (double& v : s2) v *= a;
    for (double& v : e2) v *= b;
    EXPECT_NEAR(sisdr(s2, e), base, 1e-6);
    EXPECT_NEAR(sisdr(s, e2), base, 1e-6);
  }
}

TEST(SisdrTest, DecreasesAsUncorrelatedNoiseGrows) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = gaussian(128, rng);
    auto e = s;
    for (double& v : e) v += 0.1 * gaussian(1, rng)[0];
    // Noise orthogonal to both s and e, so only the error energy changes.
    auto n = gaussian(128, rng);
    for (const std::vector<double>* basis : std::array<const std::vector<double>*, 2>{&s, &e}) {
      const double d = std::inner_product(n.begin(), n.end(), basis->begin(), 0.0) /
                       std::inner_product(basis->begin(), basis->end(), basis->begin(), 0.0);
      for (std::size_t i = 0; i < n.size(); ++i) n[i] -= d * (*basis)[i];
    }
    double prev = sisdr(s, e);
    for (double k : {0.05, 0.1, 0.2, 0.5, 1.0, 3.0}) {
      auto noisy = e;
      for (std::size_t i = 0; i < e.size(); ++i) noisy[i] += k * n[i];
      const double v = sisdr(s, noisy);
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
}

TEST(SisdrTest, Errors) {
  EXPECT_THROW(sisdr(std::vector<double>{1, 2}, std::vector<double>{1}), ShapeError);
  EXPECT_THROW(sisdr(std::vector<double>{0, 0}, std::vector<double>{1, 1}), DataError);
}

TEST(SisdrOpTest, ForwardMatchesPlainAndGradientChecks) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = avatr::testing::random_tensor({1, 40}, rng);
    auto e = avatr::testing::random_tensor({1, 40}, rng, -1, 1, true);
    Graph<double> g;
    EXPECT_NEAR(sisdr(g.constant(s), g.parameter(e)).value().data[0], sisdr(s.data, e.data), 1e-12);
    std::vector<Tensor<double>*> params{&e};
    const double err =
        ad::check_gradients([&](Graph<double>& gr) { return sisdr(gr.constant(s), gr.parameter(e)); }, params, 1e-5);
    EXPECT_LT(err, 1e-5);
  }
}

TEST(SisdrOpTest, GradTargetRejected) {
  Graph<double> g;
  auto t = g.variable(Tensor<double>({1, 2}, {1, 0}));
  EXPECT_THROW(sisdr(t, g.constant(Tensor<double>({1, 2}, {1, 1}))), Error);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  for (double gval : {1e-3, -0.5, 3.0, -200.0}) {
    Tensor<double> p({1}, {1.0}, true);
    p.grad = std::vector<double>{gval};
    std::vector<Tensor<double>*> params{&p};
    AdamState state;
    adam_step<double>(params, state, 1e-2);
    EXPECT_NEAR(p.data[0], 1.0 - 1e-2 * (gval > 0 ? 1 : -1), 1e-7);
  }
}

TEST(AdamTest, ZeroGradientIsNoOpForAnyState) {
  std::mt19937_64 rng(6);
  Tensor<double> p = avatr::testing::random_tensor({3, 4}, rng, -1, 1, true);
  std::vector<Tensor<double>*> params{&p};
  AdamState state;
  for (int i = 0; i < 5; ++i) {
    p.grad = gaussian(12, rng);
    adam_step<double>(params, state, 1e-2);
  }
  const auto before = p.data;
  const auto m = state.m, v = state.v;
  const auto t = state.t;
  p.grad = std::vector<double>(12, 0.0);
  adam_step<double>(params, state, 1e-2);
  EXPECT_EQ(p.data, before);
  EXPECT_EQ(state.m, m);
  EXPECT_EQ(state.v, v);
  EXPECT_EQ(state.t, t);
}

TEST(AdamTest, EqualGradientsGiveEqualUpdates) {
  Tensor<float> a({2}, {0.5f, -1.0f}, true), b({2}, {0.5f, -1.0f}, true);
  std::vector<Tensor<float>*> params{&a, &b};
  AdamState state;
  for (int i = 0; i < 4; ++i) {
    a.grad = b.grad = std::vector<float>{0.3f * i + 0.1f, -0.2f};
    adam_step<float>(params, state, 1e-3);
  }
  EXPECT_EQ(a.data, b.data);
}

TEST(AdamTest, ShapeMismatch) {
  Tensor<double> p({2}, {1, 2}, true);
  p.grad = std::vector<double>{1, 1};
  std::vector<Tensor<double>*> params{&p};
  AdamState state;
  adam_step<double>(params, state, 1e-3);
  Tensor<double> q({3}, {1, 2, 3}, true);
  q.grad = std::vector<double>{1, 1, 1};
  std::vector<Tensor<double>*> other{&q};
  EXPECT_THROW(adam_step<double>(other, state, 1e-3), ShapeError);
}

TEST(ClipTest, ScalesToMaxNorm) {
  Tensor<double> a({2}, {0, 0}, true), b({1}, {0}, true);
  a.grad = std::vector<double>{3, 0};
  b.grad = std::vector<double>{4};
  std::vector<Tensor<double>*> params{&a, &b};
  EXPECT_DOUBLE_EQ(clip_grad_norm<double>(params, 1.0), 5.0);
  EXPECT_NEAR((*a.grad)[0], 0.6, 1e-15);
  EXPECT_NEAR((*b.grad)[0], 0.8, 1e-15);
  EXPECT_NEAR(clip_grad_norm<double>(params, 0.0), 1.0, 1e-15);
  EXPECT_NEAR((*b.grad)[0], 0.8, 1e-15);
}

TEST(PlateauTest, Rules) {
  PlateauScheduler improving(1e-3, {});
  for (int i = 0; i < 30; ++i) EXPECT_EQ(improving.step(10.0 - i), 1e-3);

  PlateauScheduler flat(1e-3, {});
  for (int i = 0; i < 10; ++i) EXPECT_EQ(flat.step(1.0), 1e-3);
  EXPECT_EQ(flat.step(1.0), 5e-4);  // first entry sets the best, ten more stall
  for (int i = 0; i < 9; ++i) EXPECT_EQ(flat.step(1.0), 5e-4);
  EXPECT_EQ(flat.step(1.0), 2.5e-4);

  PlateauScheduler tiny_gain(1.0, {2, 0.5, 1e-4, 1e-7});
  tiny_gain.step(1.0);
  tiny_gain.step(1.0 - 5e-5);  // below min_delta: still a plateau
  EXPECT_EQ(tiny_gain.step(1.0 - 9e-5), 0.5);

  PlateauScheduler floor(1e-5, {1, 0.5, 1e-4, 1e-7});
  for (int i = 0; i < 100; ++i) EXPECT_GE(floor.step(1.0), 1e-7);
  EXPECT_EQ(floor.lr(), 1e-7);

  EXPECT_THROW(PlateauScheduler(1e-3, {10, 1.0, 1e-4, 1e-7}), ConfigError);
  EXPECT_THROW(PlateauScheduler(0.0, {}), ConfigError);
}

TEST(TrainConfigTest, KeysAndValidation) {
  TrainConfig c;
  for (const auto& [k, v] : c.to_pairs()) {
    TrainConfig d;
    d.set(k, v);
  }
  c.set("batch_size", "8");
  c.set("lr", "0.001");
  c.set("seed", "18446744073709551615");
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  EXPECT_THROW(c.set("bogus", "1"), ConfigError);
  EXPECT_THROW(c.set("lr", "fast"), ConfigError);
  EXPECT_THROW(c.set("batch_size", "-1"), ConfigError);
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.batch_size = 16;
  c.plateau_factor = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(TrainConfig{}.batch_size, 16u);
  EXPECT_EQ(TrainConfig{}.lr, 1e-4);

  DataConfig d;
  d.set("regime", "open");
  d.set("mixture", "s+a");
  EXPECT_EQ(d.regime, audio::Regime::open);
  EXPECT_EQ(d.mixture, audio::MixtureType::speech_both);
  EXPECT_THROW(d.set("regime", "ajar"), ConfigError);
  EXPECT_THROW(d.set("colour", "red"), ConfigError);
}

TEST(ReportTest, MeanErrorAndHistogram) {
  const EvalReport r = make_report({-1.0, 0.25, 0.5, 2.0}, {3.0, 4.5, 5.0, 7.5});
  EXPECT_NEAR(r.mean, 5.0, 1e-12);
  EXPECT_NEAR(r.input_mean, 0.4375, 1e-12);
  EXPECT_NEAR(r.improvement(), 4.5625, 1e-12);
  // sample sd of {3, 4.5, 5, 7.5} is sqrt(3.5), standard error sqrt(3.5 / 4)
  EXPECT_NEAR(r.standard_error, std::sqrt(3.5 / 4.0), 1e-12);
  EXPECT_EQ(r.histogram.low, -1.0);
  ASSERT_EQ(r.histogram.input_counts.size(), 9u);
  EXPECT_EQ(std::accumulate(r.histogram.input_counts.begin(), r.histogram.input_counts.end(), 0u), 4u);
  EXPECT_EQ(std::accumulate(r.histogram.output_counts.begin(), r.histogram.output_counts.end(), 0u), 4u);
  EXPECT_EQ(r.histogram.input_counts[1], 2u);   // [0, 1)
  EXPECT_EQ(r.histogram.output_counts[8], 1u);  // [7, 8)
  EXPECT_THROW(make_report({}, {}), DataError);
}

class TrainingTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new avatr::testing::TempDir("train");
    audio::SynthOptions o;
    o.clip_seconds = 0.05;
    o.noise_seconds = 0.05;
    o.noise_clips = 1;
    corpus_ = new audio::Corpus(audio::synth_corpus_generate(dir_->path(), o, 3), audio::Regime::closed, 16000);
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete dir_;
  }

  static model::ModelConfig tiny_model() {
    model::ModelConfig c;
    c.hidden = 8;
    c.heads = 2;
    c.blocks = 1;
    c.avatar_blocks = 1;
    return c;
  }
  static model::ModelConfig identity_model() {
    model::ModelConfig c = tiny_model();
    c.kernel = c.stride = 4;
    c.blocks = 0;
    c.mask = model::MaskNonlinearity::none;
    return c;
  }
  static TrainConfig tiny_train() {
    TrainConfig t;
    t.batch_size = 4;
    t.episodes_per_epoch = 8;
    t.val_episodes = 4;
    t.max_epochs = 2;
    t.clip_seconds = 0.03;
    t.reference_seconds = 0.02;
    t.lr = 1e-3;
    t.seed = 17;
    return t;
  }
  static audio::EpisodeOptions train_options(const TrainConfig& t) {
    audio::EpisodeOptions o;
    o.target_samples = static_cast<std::size_t>(std::llround(t.clip_seconds * 16000));
    o.reference_samples = static_cast<std::size_t>(std::llround(t.reference_seconds * 16000));
    return o;
  }

  static avatr::testing::TempDir* dir_;
  static audio::Corpus* corpus_;
};
avatr::testing::TempDir* TrainingTest::dir_ = nullptr;
audio::Corpus* TrainingTest::corpus_ = nullptr;

TEST_F(TrainingTest, EpisodicLossIsBatchMean) {
  model::AvatrModel<double> m(tiny_model(), 1);
  std::vector<audio::Episode> batch;
  for (std::uint64_t i = 0; i < 2; ++i) {
    auto rng = substream(1, "episodes", i);
    batch.push_back(audio::sample_episode(*corpus_, rng, train_options(tiny_train())));
  }
  Graph<double> g;
  const double both = episodic_loss<double>(g, m, batch).value().data[0];
  const double first = episodic_loss<double>(g, m, std::span(batch).first(1)).value().data[0];
  const double second = episodic_loss<double>(g, m, std::span(batch).last(1)).value().data[0];
  EXPECT_NEAR(both, (first + second) / 2, 1e-12);
}

TEST_F(TrainingTest, IdentityModelLossIsNegativeInputSisdr) {
  model::AvatrModel<double> m(identity_model(), 1);
  m.set_identity_codec();
  std::vector<audio::Episode> batch;
  double input = 0;
  for (std::uint64_t i = 0; i < 6; ++i) {
    auto rng = substream(2, "episodes", i);
    batch.push_back(audio::sample_episode(*corpus_, rng, train_options(tiny_train())));
    input += sisdr(std::span<const float>(batch.back().target), std::span<const float>(batch.back().mixture));
  }
  Graph<double> g;
  EXPECT_NEAR(episodic_loss<double>(g, m, batch).value().data[0], -input / 6, 1e-9);

  // Perfect output: the mixture is the target itself.
  audio::Episode clean = batch[0];
  clean.mixture = clean.target;
  EXPECT_LE(episodic_loss<double>(g, m, std::span(&clean, 1)).value().data[0], -80.0);
}

TEST_F(TrainingTest, StepZeroLossAnchor) {
  TrainConfig t = tiny_train();
  t.batch_size = t.episodes_per_epoch;  // one step per epoch: epoch loss == step-0 loss
  t.max_epochs = 1;
  model::AvatrModel<float> m(identity_model(), 0);
  m.set_identity_codec();
  const auto result = run_training(*corpus_, identity_model(), t, audio::MixtureType::speech_speech, {}, m);
  double input = 0;
  for (std::uint64_t i = 0; i < t.episodes_per_epoch; ++i) {
    auto rng = substream(t.seed, "episodes", i);
    const auto e = audio::sample_episode(*corpus_, rng, train_options(t));
    input += sisdr(std::span<const float>(e.target), std::span<const float>(e.mixture));
  }
  EXPECT_NEAR(result.log.at(0).train_loss, -input / t.episodes_per_epoch, 1e-4);
}

TEST_F(TrainingTest, SeededRunsAreBitIdentical) {
  const auto a = run_training(*corpus_, tiny_model(), tiny_train(), audio::MixtureType::speech_speech);
  auto b = run_training(*corpus_, tiny_model(), tiny_train(), audio::MixtureType::speech_speech);
  ASSERT_EQ(a.log.size(), 2u);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
    EXPECT_EQ(a.log[i].val_loss, b.log[i].val_loss);
  }
  auto a_model = a.best_model;
  EXPECT_EQ(model::save_checkpoint(a_model), model::save_checkpoint(b.best_model));
  TrainConfig other = tiny_train();
  other.seed = 18;
  const auto c = run_training(*corpus_, tiny_model(), other, audio::MixtureType::speech_speech);
  EXPECT_NE(c.log[0].train_loss, a.log[0].train_loss);
}

TEST_F(TrainingTest, BestCheckpointIsMinimumValidationEpoch) {
  TrainConfig t = tiny_train();
  t.max_epochs = 5;
  auto r = run_training(*corpus_, tiny_model(), t, audio::MixtureType::speech_noise);
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < r.log.size(); ++i)
    if (r.log[i].val_loss < r.log[argmin].val_loss) argmin = i;
  EXPECT_EQ(r.best_epoch, argmin + 1);
  EXPECT_EQ(r.best_val_loss, r.log[argmin].val_loss);
  const auto val = validation_episodes(*corpus_, t, audio::MixtureType::speech_noise);
  EXPECT_NEAR(-score_episodes(r.best_model, val).mean, r.best_val_loss, 1e-12);
}

TEST_F(TrainingTest, CallbackStopsEarly) {
  TrainConfig t = tiny_train();
  t.max_epochs = 10;
  auto r = run_training(*corpus_, tiny_model(), t, audio::MixtureType::speech_speech,
                        [](const EpochLog& row, model::AvatrModel<float>&) { return row.epoch < 3; });
  EXPECT_EQ(r.log.size(), 3u);
}

TEST_F(TrainingTest, NonFiniteLossAborts) {
  model::AvatrModel<float> m(tiny_model(), 0);
  m.visit([](const std::string& name, Tensor<float>& p) {
    if (name == "decoder.weight") p.data[0] = std::numeric_limits<float>::quiet_NaN();
  });
  try {
    run_training(*corpus_, tiny_model(), tiny_train(), audio::MixtureType::speech_speech, {}, m);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("seed 17"), std::string::npos);
  }
}

TEST_F(TrainingTest, RateMismatchRejected) {
  model::ModelConfig c = tiny_model();
  c.sample_rate = 8000;
  EXPECT_THROW(run_training(*corpus_, c, tiny_train(), audio::MixtureType::speech_speech), ConfigError);
}

TEST_F(TrainingTest, EvaluateIdentityAndDeterminism) {
  model::AvatrModel<float> m(identity_model(), 0);
  m.set_identity_codec();
  const auto r = evaluate(*corpus_, m, audio::Split::test, audio::MixtureType::speech_both, 12, 5, 0.02);
  ASSERT_EQ(r.output_sisdr.size(), 12u);
  EXPECT_NEAR(r.mean, r.input_mean, 1e-6);
  for (double v : r.input_sisdr) EXPECT_NEAR(v, 0.0, 0.5);  // 0 dB mixing
  EXPECT_NEAR(std::accumulate(r.output_sisdr.begin(), r.output_sisdr.end(), 0.0) / 12, r.mean, 1e-9);
  const auto again = evaluate(*corpus_, m, audio::Split::test, audio::MixtureType::speech_both, 12, 5, 0.02);
  EXPECT_EQ(again.output_sisdr, r.output_sisdr);
}

}  // namespace
