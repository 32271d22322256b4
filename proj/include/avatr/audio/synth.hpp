#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string_view>
#include <vector>

#include "avatr/audio/corpus.hpp"

namespace avatr::audio {

// A synthetic speaker: harmonic source at a fixed f0 shaped by a resonance,
// gated by a syllable-rate amplitude envelope.
struct Voice {
  double f0 = 0.0;
  double formant_hz = 0.0;
  double formant_width_hz = 0.0;
  std::vector<double> harmonic_gain;  // per-harmonic multiplier on the resonance
  double syllable_seconds = 0.0;      // mean syllable duration
  double gap_seconds = 0.0;           // mean pause between syllables
};

enum class NoiseKind { white, pink, sweep };
std::string_view to_string(NoiseKind k);

// f0 and resonance centres are drawn without collisions: f0 values are at
// least 12 Hz apart for up to 6 speakers, closer (but distinct) beyond.
std::vector<Voice> draw_voices(std::size_t count, std::mt19937_64& rng);
std::vector<float> synth_utterance(const Voice& voice, std::size_t samples, int sample_rate, std::mt19937_64& rng);
std::vector<float> synth_noise(NoiseKind kind, std::size_t samples, int sample_rate, std::mt19937_64& rng);

struct SynthOptions {
  std::size_t speakers = 4;
  std::size_t clips = 5;
  // Speakers whose clips all go to the test split (an open-set manifest);
  // the others then contribute only train and val clips. With 0, each speaker
  // gives one val and one test clip once it has four or more clips, which is
  // a closed-set manifest. Three clips give train, train, val.
  std::size_t open_speakers = 0;
  std::size_t noise_clips = 2;  // per noise kind
  double clip_seconds = 3.0;
  double noise_seconds = 3.0;
  int sample_rate = kDefaultSampleRate;
};

// Writes speech/<speaker>_<clip>.wav, noise/<kind>_<i>.wav and manifest.tsv
// under dir; returns the manifest.
Manifest synth_corpus_generate(const std::filesystem::path& dir, const SynthOptions& options, std::uint64_t seed);

}  // namespace avatr::audio
