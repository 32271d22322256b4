#pragma once

#include <filesystem>
#include <vector>

namespace avatr::audio {

inline constexpr int kDefaultSampleRate = 16000;

struct Waveform {
  std::vector<float> samples;
  int sample_rate = kDefaultSampleRate;

  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// PCM16 mono or stereo (averaged to mono). expected_rate == 0 accepts any rate.
Waveform read_wav(const std::filesystem::path& path, int expected_rate = 0);
Waveform decode_wav(const std::vector<unsigned char>& bytes, int expected_rate = 0);

// Mono PCM16; samples are clamped to [-1, 1] and rounded.
void write_wav(const std::filesystem::path& path, const Waveform& w);
std::vector<unsigned char> encode_wav(const Waveform& w);

}  // namespace avatr::audio
