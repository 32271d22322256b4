#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "avatr/gradcheck.hpp"
#include "avatr/model/avatr.hpp"
#include "avatr/model/checkpoint.hpp"
#include "avatr/ops.hpp"
#include "test_util.hpp"

namespace {

using namespace avatr;
using namespace avatr::model;
using ad::Graph;
using ad::Tensor;
using avatr::testing::random_tensor;

ModelConfig tiny(Variant variant) {
  ModelConfig c;
  c.variant = variant;
  c.hidden = 8;
  c.heads = 2;
  c.blocks = 1;
  c.encoder_blocks = 1;
  c.cab_blocks = 1;
  c.avatar_blocks = 1;
  return c;
}

std::vector<float> random_wave(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 0.3f);
  std::vector<float> out(n);
  for (float& v : out) v = g(rng);
  return out;
}

ad::Var<double> wave_var(Graph<double>& g, const std::vector<double>& x) {
  return g.constant(Tensor<double>({1, x.size()}, x));
}

TEST(FrameGeometryTest, SpecExamples) {
  EXPECT_EQ(frame_count(16, 16, 8), 1u);
  EXPECT_EQ(frame_count(24, 16, 8), 2u);
  EXPECT_EQ(padded_length(1, 16, 8), 16u);
  EXPECT_EQ(padded_length(17, 16, 8), 24u);
  for (std::size_t len = 1; len < 300; ++len) {
    const std::size_t p = padded_length(len, 16, 8);
    EXPECT_GE(p, len);
    EXPECT_GE(p, 16u);
    EXPECT_EQ((p - 16) % 8, 0u);
    EXPECT_LT(p - std::max<std::size_t>(len, 16), 8u);
  }
}

TEST(EncodeTest, FrameCountAndZeroInput) {
  AvatrModel<double> m(tiny(Variant::v1), 1);
  Graph<double> g;
  auto f = m.encode_waveform(wave_var(g, std::vector<double>(24, 0.0)));
  EXPECT_EQ(f.frames.shape(), (ad::Shape{2, 8}));
  EXPECT_EQ(f.original_length, 24u);
  for (double v : f.frames.value().data) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(m.encode_waveform(wave_var(g, std::vector<double>(16, 1.0))).frames.shape()[0], 1u);
}

TEST(EncodeTest, EmptyWaveformRejected) {
  AvatrModel<float> m(tiny(Variant::v1), 1);
  std::vector<float> ref(64, 0.1f);
  EXPECT_THROW(m.extract({}, ref), DataError);
  EXPECT_THROW(m.extract(ref, {}), DataError);
}

TEST(DecodeTest, LengthRoundTripsForRandomLengths) {
  AvatrModel<double> m(tiny(Variant::v1), 2);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = avatr::testing::random_extent(rng, 1, 1000);
    Graph<double> g;
    auto x = g.constant(random_tensor({1, len}, rng));
    auto f = m.encode_waveform(x);
    EXPECT_EQ(m.decode_features(f.frames, f.original_length).shape(), (ad::Shape{1, len}));
  }
}

TEST(DecodeTest, ZeroFeaturesGiveZeroWave) {
  AvatrModel<double> m(tiny(Variant::v1), 2);
  Graph<double> g;
  auto out = m.decode_features(g.constant(Tensor<double>::zeros({3, 8})), 30);
  EXPECT_EQ(out.shape(), (ad::Shape{1, 30}));
  for (double v : out.value().data) EXPECT_EQ(v, 0.0);
}

TEST(DecodeTest, InconsistentLengthRejected) {
  AvatrModel<double> m(tiny(Variant::v1), 2);
  Graph<double> g;
  auto f = g.constant(Tensor<double>::zeros({3, 8}));
  EXPECT_THROW(m.decode_features(f, 40), ShapeError);  // 40 pads to 40, 3 frames span 32
  EXPECT_THROW(m.decode_features(f, 24), ShapeError);
  EXPECT_THROW(m.decode_features(f, 0), ShapeError);
  EXPECT_NO_THROW(m.decode_features(f, 25));
  EXPECT_THROW(m.decode_features(g.constant(Tensor<double>::zeros({3, 5})), 32), ShapeError);
}

TEST(DecodeTest, NonOverlappingIdentityFramesByHand) {
  ModelConfig c = tiny(Variant::v1);
  c.kernel = 2;
  c.stride = 2;
  c.hidden = 4;
  AvatrModel<double> m(c, 0);
  m.set_identity_codec();
  Graph<double> g;
  auto f = m.encode_waveform(wave_var(g, {0.5, -1.0, 2.0, 0.25}));
  // Channels per frame: relu(x0), relu(-x0), relu(x1), relu(-x1).
  const std::vector<double> frames{0.5, 0.0, 0.0, 1.0, 2.0, 0.0, 0.25, 0.0};
  EXPECT_EQ(f.frames.value().data, frames);
  const auto out = m.decode_features(f.frames, 4).value().data;
  EXPECT_EQ(out, (std::vector<double>{0.5, -1.0, 2.0, 0.25}));
}

TEST(DecodeTest, IdentityCodecNeedsNonOverlappingGeometry) {
  AvatrModel<double> m(tiny(Variant::v1), 0);
  EXPECT_THROW(m.set_identity_codec(), ConfigError);
}

TEST(AvatarTest, WidthAndShortReference) {
  AvatrModel<double> m(tiny(Variant::v1), 4);
  std::mt19937_64 rng(5);
  Graph<double> g;
  EXPECT_EQ(m.compute_avatar(g.constant(random_tensor({1, 40}, rng))).shape(), (ad::Shape{8}));
  EXPECT_THROW(m.compute_avatar(g.constant(random_tensor({1, 15}, rng))), DataError);
}

TEST(AvatarTest, ZeroReferenceGivesConstantVector) {
  AvatrModel<float> m(tiny(Variant::v1), 4);
  const auto a = m.avatar(std::vector<float>(64, 0.0f));
  const auto b = m.avatar(std::vector<float>(200, 0.0f));
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::isfinite(a[i]));
    EXPECT_NEAR(a[i], b[i], 1e-6);
  }
  EXPECT_EQ(a, m.avatar(std::vector<float>(64, 0.0f)));
}

TEST(PositionMaskTest, ZeroAvatarHalvesFeatures) {
  std::mt19937_64 rng(6);
  Graph<double> g;
  auto f = g.constant(random_tensor({5, 3}, rng));
  const auto out = apply_position_mask(f, g.constant(Tensor<double>::zeros({3}))).value().data;
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_DOUBLE_EQ(out[i], f.value().data[i] / 2);
}

TEST(PositionMaskTest, HandEvaluation) {
  Graph<double> g;
  auto f = g.constant(Tensor<double>({2, 2}, {1, 0, 0, 1}));
  auto a = g.constant(Tensor<double>({2}, {1, 0}));
  const auto out = apply_position_mask(f, a).value().data;
  EXPECT_NEAR(out[0], 0.7311, 1e-4);
  EXPECT_EQ(out[1], 0.0);
  EXPECT_EQ(out[2], 0.0);
  EXPECT_NEAR(out[3], 0.5, 1e-12);
}

TEST(PositionMaskTest, SaturatesAndRejectsWidthMismatch) {
  Graph<double> g;
  auto f = g.constant(Tensor<double>({2, 2}, {1, 1, -1, -1}));
  const auto out = apply_position_mask(f, g.constant(Tensor<double>({2}, {50, 50}))).value().data;
  EXPECT_NEAR(out[0], 1.0, 1e-12);
  EXPECT_NEAR(out[2], 0.0, 1e-12);
  EXPECT_THROW(apply_position_mask(f, g.constant(Tensor<double>::zeros({3}))), ShapeError);
}

TEST(PositionMaskTest, GateStaysInOpenInterval) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Graph<double> g;
    const std::size_t n = avatr::testing::random_extent(rng, 1, 6), d = avatr::testing::random_extent(rng, 1, 6);
    auto f = random_tensor({n, d}, rng, 0.1, 2.0);
    auto a = random_tensor({d}, rng, -3, 3);
    const auto out = apply_position_mask(g.constant(f), g.constant(a)).value().data;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = out[i * d] / f.data[i * d];
      EXPECT_GT(m, 0.0);
      EXPECT_LT(m, 1.0);
    }
  }
}

class ForwardTest : public ::testing::TestWithParam<Variant> {};

TEST_P(ForwardTest, PreservesLengthAndIsDeterministic) {
  std::mt19937_64 rng(8);
  AvatrModel<float> a(tiny(GetParam()), 42), b(tiny(GetParam()), 42), c(tiny(GetParam()), 43);
  const auto ref = random_wave(80, rng);
  for (std::size_t len : {16u, 17u, 31u, 64u, 129u}) {
    const auto mix = random_wave(len, rng);
    const auto out = a.extract(mix, ref);
    EXPECT_EQ(out.size(), len);
    EXPECT_EQ(out, b.extract(mix, ref));
    EXPECT_NE(out, c.extract(mix, ref));
  }
}

TEST_P(ForwardTest, MaskRangeFollowsNonlinearity) {
  std::mt19937_64 rng(9);
  for (auto kind : {MaskNonlinearity::sigmoid, MaskNonlinearity::relu}) {
    ModelConfig c = tiny(GetParam());
    c.mask = kind;
    AvatrModel<double> m(c, 10);
    Graph<double> g;
    auto f = m.encode_waveform(g.constant(random_tensor({1, 72}, rng)));
    const auto mask = m.activation_mask(f, g.constant(random_tensor({1, 48}, rng))).value().data;
    for (double v : mask) {
      if (kind == MaskNonlinearity::sigmoid) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      } else {
        EXPECT_GE(v, 0.0);
      }
    }
  }
}

TEST_P(ForwardTest, EndToEndGradientCheck) {
  ModelConfig c = tiny(GetParam());
  c.dropout = 0.0;
  AvatrModel<double> m(c, 11);
  std::mt19937_64 rng(12);
  const auto mix = random_tensor({1, 64}, rng);
  const auto ref = random_tensor({1, 64}, rng);
  const auto w = random_tensor({1, 64}, rng);
  auto params = m.parameters();
  const double err = ad::check_gradients(
      [&](Graph<double>& g) { return ad::sum(ad::mul(m.forward(g.constant(mix), g.constant(ref)), g.constant(w))); },
      params, 1e-5, 1e-6);
  EXPECT_LT(err, 1e-3);
}

INSTANTIATE_TEST_SUITE_P(Variants, ForwardTest, ::testing::Values(Variant::v1, Variant::v2),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(ForwardTest, V2ZeroAvatarSingleCabStaysShapeValid) {
  ModelConfig c = tiny(Variant::v2);
  AvatrModel<double> m(c, 13);
  // Zero avatar-encoder taps make every reference frame zero, so the avatar
  // is the layer-norm bias path, which is zero at init.
  m.visit([](const std::string& name, Tensor<double>& t) {
    if (name == "avatar.encoder.weight") std::fill(t.data.begin(), t.data.end(), 0.0);
  });
  std::mt19937_64 rng(14);
  Graph<double> g;
  auto ref = g.constant(random_tensor({1, 64}, rng));
  for (double v : m.compute_avatar(ref).value().data) EXPECT_EQ(v, 0.0);
  auto out = m.forward(g.constant(random_tensor({1, 50}, rng)), ref);
  EXPECT_EQ(out.shape(), (ad::Shape{1, 50}));
  for (double v : out.value().data) EXPECT_TRUE(std::isfinite(v));
}

TEST(ForwardTest, V2DecoderRowsNeedPositionalCode) {
  // Y0 is zero, so the positional code is all that separates decoder rows.
  std::mt19937_64 rng(14);
  const auto mix = random_tensor({1, 96}, rng), ref = random_tensor({1, 48}, rng);
  for (bool pe : {true, false}) {
    ModelConfig c = tiny(Variant::v2);
    c.positional_encoding = pe;
    AvatrModel<double> m(c, 15);
    Graph<double> g;
    const auto mask = m.activation_mask(m.encode_waveform(g.constant(mix)), g.constant(ref)).value();
    double spread = 0.0;
    for (std::size_t i = 1; i < mask.rows(); ++i)
      for (std::size_t j = 0; j < mask.cols(); ++j) spread = std::max(spread, std::abs(mask.at(i, j) - mask.at(0, j)));
    if (pe) EXPECT_GT(spread, 1e-3);
    else EXPECT_LT(spread, 1e-12);
  }
}

TEST(ForwardTest, NoBlocksReducesToEncodeDecode) {
  for (Variant v : {Variant::v1, Variant::v2}) {
    ModelConfig c = tiny(v);
    c.kernel = c.stride = 4;
    c.blocks = c.encoder_blocks = c.cab_blocks = 0;
    c.mask = MaskNonlinearity::none;
    AvatrModel<float> m(c, 15);
    m.set_identity_codec();
    EXPECT_FALSE(m.has_mask());
    std::mt19937_64 rng(16);
    const auto mix = random_wave(37, rng);
    EXPECT_EQ(m.extract(mix, random_wave(20, rng)), mix);
  }
}

TEST(ParameterTest, ReferenceV1CountMatchesFormula) {
  ModelConfig c;
  c.hidden = 256;
  c.blocks = 5;
  AvatrModel<float> m(c, 0);
  // Per SAB: four d x d projections with bias, d -> 4d -> d MLP, two norms.
  const std::size_t d = 256, k = 16;
  const std::size_t sab = 4 * (d * d + d) + (d * 4 * d + 4 * d) + (4 * d * d + d) + 2 * 2 * d;
  EXPECT_EQ(sab, 789760u);
  EXPECT_EQ(m.parameter_count(), 3 * d * k + (5 + 2) * sab);
  EXPECT_EQ(m.parameter_count(), 5540608u);
}

TEST(ParameterTest, VariantNames) {
  std::vector<std::string> v1, v2;
  AvatrModel<float>(tiny(Variant::v1), 0).visit([&](const std::string& n, Tensor<float>&) { v1.push_back(n); });
  AvatrModel<float>(tiny(Variant::v2), 0).visit([&](const std::string& n, Tensor<float>&) { v2.push_back(n); });
  auto has_prefix = [](const std::vector<std::string>& names, const std::string& p) {
    return std::any_of(names.begin(), names.end(), [&](const std::string& n) { return n.rfind(p, 0) == 0; });
  };
  EXPECT_TRUE(has_prefix(v1, "sab0.attn.query.weight"));
  EXPECT_FALSE(has_prefix(v1, "cab"));
  EXPECT_TRUE(has_prefix(v2, "encoder_sab0.mlp.hidden.weight"));
  EXPECT_TRUE(has_prefix(v2, "cab0.cross_attn.key.bias"));
  EXPECT_TRUE(has_prefix(v2, "cab0.norm3.gamma"));
  EXPECT_TRUE(has_prefix(v2, "avatar.sab0.norm2.beta"));
}

TEST(ParameterTest, CastPreservesValues) {
  AvatrModel<float> m(tiny(Variant::v2), 17);
  auto d = m.cast<double>();
  auto back = d.cast<float>();
  auto a = m.parameters(), b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->data, b[i]->data);
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  for (Variant v : {Variant::v1, Variant::v2}) {
    ModelConfig c = tiny(v);
    c.mask = MaskNonlinearity::relu;
    c.positional_encoding = false;
    c.dropout = 0.25;
    AvatrModel<float> m(c, 18);
    const auto bytes = save_checkpoint(m);
    auto loaded = load_checkpoint(bytes);
    EXPECT_EQ(loaded.config(), m.config());
    EXPECT_EQ(save_checkpoint(loaded), bytes);
    std::mt19937_64 rng(19);
    const auto mix = random_wave(100, rng), ref = random_wave(64, rng);
    EXPECT_EQ(loaded.extract(mix, ref), m.extract(mix, ref));
  }
}

TEST(CheckpointTest, HeaderLayout) {
  AvatrModel<float> m(tiny(Variant::v1), 0);
  const auto bytes = save_checkpoint(m);
  ASSERT_GT(bytes.size(), 10u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "AVTR");
  EXPECT_EQ(bytes[4] | (bytes[5] << 8), 1);
}

TEST(CheckpointTest, CorruptionIsReported) {
  AvatrModel<float> m(tiny(Variant::v1), 0);
  auto bytes = save_checkpoint(m);
  auto bad = bytes;
  bad[1] = 'X';
  try {
    load_checkpoint(bad);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("bad checkpoint"), std::string::npos);
  }
  bad = bytes;
  bad[4] = 7;
  EXPECT_THROW(load_checkpoint(bad), CheckpointError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(load_checkpoint(std::span(bytes).first(cut)), CheckpointError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(load_checkpoint(bad), CheckpointError);
}

TEST(CheckpointTest, ConfigIncompatibilityRejected) {
  AvatrModel<float> m(tiny(Variant::v1), 0);
  auto bytes = save_checkpoint(m);
  std::string text(bytes.begin(), bytes.end());
  const auto pos = text.find("blocks=1\n");
  ASSERT_NE(pos, std::string::npos);
  bytes[pos + 7] = '2';  // config now implies a second SAB the records lack
  EXPECT_THROW(load_checkpoint(bytes), CheckpointError);
}

TEST(CheckpointTest, ReferenceModelReloadsWithSameCount) {
  ModelConfig c;
  AvatrModel<float> m(c, 20);
  auto loaded = load_checkpoint(save_checkpoint(m));
  EXPECT_EQ(loaded.parameter_count(), 5540608u);
}

}  // namespace
