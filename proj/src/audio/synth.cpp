#include "avatr/audio/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "avatr/audio/wav.hpp"
#include "avatr/error.hpp"
#include "avatr/random.hpp"

namespace avatr::audio {

std::string_view to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::white: return "white";
    case NoiseKind::pink: return "pink";
    case NoiseKind::sweep: return "sweep";
  }
  return "?";
}

namespace {

constexpr double kMinSpacingHz = 12.0;
constexpr double kPeak = 0.5;

// Rejection-samples `count` values in [lo, hi] that are pairwise >= spacing apart.
std::vector<double> spaced_draws(std::size_t count, double lo, double hi, double spacing, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out;
  for (int attempt = 0; out.size() < count; ++attempt) {
    if (attempt > 100000) throw ConfigError("cannot draw " + std::to_string(count) + " distinct voices");
    const double v = u(rng);
    if (std::all_of(out.begin(), out.end(), [&](double w) { return std::abs(w - v) >= spacing; })) out.push_back(v);
  }
  return out;
}

void normalize_peak(std::vector<float>& x, double peak) {
  float m = 0.0f;
  for (float v : x) m = std::max(m, std::abs(v));
  if (m > 0.0f)
    for (float& v : x) v = static_cast<float>(v * peak / m);
}

}  // namespace

std::vector<Voice> draw_voices(std::size_t count, std::mt19937_64& rng) {
  // Spacing shrinks for large speaker counts so rejection sampling stays cheap.
  const double n = static_cast<double>(std::max<std::size_t>(count, 1));
  const auto f0 = spaced_draws(count, 90.0, 320.0, std::min(kMinSpacingHz, 230.0 / (3.0 * n)), rng);
  // Resonances spread on a log axis so speakers also differ in spectral colour.
  const double lo = std::log(350.0), hi = std::log(3200.0);
  auto log_formant = spaced_draws(count, lo, hi, (hi - lo) / (2.0 * n), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Voice> voices(count);
  for (std::size_t i = 0; i < count; ++i) {
    Voice& v = voices[i];
    v.f0 = f0[i];
    v.formant_hz = std::exp(log_formant[i]);
    v.formant_width_hz = v.formant_hz * (0.15 + 0.1 * u(rng));
    v.harmonic_gain.resize(40);
    for (double& g : v.harmonic_gain) g = 0.5 + 0.5 * u(rng);
    v.syllable_seconds = 0.12 + 0.1 * u(rng);
    v.gap_seconds = 0.02 + 0.03 * u(rng);
  }
  return voices;
}

std::vector<float> synth_utterance(const Voice& voice, std::size_t samples, int rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const double nyquist = 0.45 * rate;

  // Syllable envelope: raised-cosine bumps with jittered length and level.
  std::vector<double> envelope(samples, 0.0);
  double t = -u(rng) * voice.syllable_seconds;  // utterances start mid-syllable
  while (t * rate < static_cast<double>(samples)) {
    const double len = voice.syllable_seconds * (0.6 + 0.8 * u(rng));
    const double level = 0.6 + 0.4 * u(rng);
    const auto start = static_cast<long long>(std::floor(t * rate));
    const auto n = static_cast<long long>(len * rate);
    for (long long i = std::max(0LL, -start); i < n && start + i < static_cast<long long>(samples); ++i)
      envelope[static_cast<std::size_t>(start + i)] = level * 0.5 * (1.0 - std::cos(two_pi * i / n));
    t += len + voice.gap_seconds * (0.5 + u(rng));
  }

  std::vector<double> out(samples, 0.0);
  for (std::size_t h = 1; h <= voice.harmonic_gain.size(); ++h) {
    const double f = voice.f0 * h;
    if (f >= nyquist) break;
    const double z = (f - voice.formant_hz) / voice.formant_width_hz;
    const double amp = voice.harmonic_gain[h - 1] * (std::exp(-0.5 * z * z) + 0.03 / h);
    const double phase = two_pi * u(rng);
    const double w = two_pi * f / rate;
    for (std::size_t i = 0; i < samples; ++i) out[i] += amp * std::sin(w * i + phase);
  }
  std::vector<float> wave(samples);
  for (std::size_t i = 0; i < samples; ++i) wave[i] = static_cast<float>(out[i] * envelope[i]);
  normalize_peak(wave, kPeak);
  return wave;
}

std::vector<float> synth_noise(NoiseKind kind, std::size_t samples, int rate, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<float> out(samples);
  switch (kind) {
    case NoiseKind::white:
      for (float& v : out) v = static_cast<float>(g(rng));
      break;
    case NoiseKind::pink: {
      // Paul Kellet's economy pink filter.
      double b0 = 0, b1 = 0, b2 = 0;
      for (float& v : out) {
        const double w = g(rng);
        b0 = 0.99765 * b0 + w * 0.0990460;
        b1 = 0.96300 * b1 + w * 0.2965164;
        b2 = 0.57000 * b2 + w * 1.0526913;
        v = static_cast<float>(b0 + b1 + b2 + w * 0.1848);
      }
      break;
    }
    case NoiseKind::sweep: {
      // Exponential chirp between two random frequencies, restarted each period.
      const double f1 = 100.0 + 400.0 * u(rng), f2 = 1500.0 + 4000.0 * u(rng);
      const double period = 0.5 + u(rng);
      const double k = std::log(f2 / f1) / period;
      for (std::size_t i = 0; i < samples; ++i) {
        const double t = std::fmod(static_cast<double>(i) / rate, period);
        out[i] = static_cast<float>(std::sin(2.0 * std::numbers::pi * f1 * (std::exp(k * t) - 1.0) / k));
      }
      break;
    }
  }
  normalize_peak(out, kPeak);
  return out;
}

Manifest synth_corpus_generate(const std::filesystem::path& dir, const SynthOptions& options, std::uint64_t seed) {
  if (options.speakers < 2) throw ConfigError("synth: need at least 2 speakers");
  if (options.clips < 1) throw ConfigError("synth: need at least 1 clip per speaker");
  if (options.open_speakers >= options.speakers) throw ConfigError("synth: open speakers must leave a training speaker");
  if (options.clip_seconds <= 0 || options.noise_seconds <= 0) throw ConfigError("synth: durations must be positive");
  std::filesystem::create_directories(dir / "speech");
  std::filesystem::create_directories(dir / "noise");

  auto voice_rng = substream(seed, "synth.voices");
  const auto voices = draw_voices(options.speakers, voice_rng);
  const auto speech_len = static_cast<std::size_t>(std::llround(options.clip_seconds * options.sample_rate));
  const auto noise_len = static_cast<std::size_t>(std::llround(options.noise_seconds * options.sample_rate));

  Manifest m;
  m.base = dir;
  for (std::size_t s = 0; s < options.speakers; ++s) {
    char id[16];
    std::snprintf(id, sizeof id, "spk%02zu", s);
    const bool open = s >= options.speakers - options.open_speakers;
    for (std::size_t c = 0; c < options.clips; ++c) {
      Split split = Split::train;
      if (open) {
        split = Split::test;
      } else if (options.open_speakers == 0 && options.clips >= 4 && c == options.clips - 1) {
        split = Split::test;
      } else if (options.clips >= 3 && c == (options.open_speakers == 0 && options.clips >= 4 ? options.clips - 2
                                                                                            : options.clips - 1)) {
        split = Split::val;
      }
      auto rng = substream(seed, "synth.utterance", s * 100000 + c);
      const auto rel = std::filesystem::path("speech") / (std::string(id) + "_" + std::to_string(c) + ".wav");
      write_wav(dir / rel, {synth_utterance(voices[s], speech_len, options.sample_rate, rng), options.sample_rate});
      m.clips.push_back({split, id, rel});
    }
  }
  std::size_t index = 0;
  for (NoiseKind kind : {NoiseKind::white, NoiseKind::pink, NoiseKind::sweep}) {
    for (std::size_t i = 0; i < options.noise_clips; ++i, ++index) {
      auto rng = substream(seed, "synth.noise", index);
      const auto rel = std::filesystem::path("noise") / (std::string(to_string(kind)) + "_" + std::to_string(i) + ".wav");
      write_wav(dir / rel, {synth_noise(kind, noise_len, options.sample_rate, rng), options.sample_rate});
      m.noise.push_back({std::string(to_string(kind)), rel});
    }
  }
  std::ofstream out(dir / "manifest.tsv");
  if (!out) throw DataError("synth: cannot write manifest in " + dir.string());
  out << m.to_text();
  return m;
}

}  // namespace avatr::audio
