#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "avatr/audio/wav.hpp"

namespace avatr::audio {

enum class Regime { open, closed };
enum class MixtureType { speech_noise, speech_speech, speech_both };
enum class Split { train, val, test };

Regime parse_regime(std::string_view text);
MixtureType parse_mixture(std::string_view text);  // "s+n", "s+s", "s+a"
Split parse_split(std::string_view text);
std::string_view to_string(Regime r);
std::string_view to_string(MixtureType m);
std::string_view to_string(Split s);

struct ManifestClip {
  Split split = Split::train;
  std::string speaker;
  std::filesystem::path path;
};

struct ManifestNoise {
  std::string noise_class;
  std::filesystem::path path;
};

// Line-oriented: "split<TAB>speaker<TAB>path" and "noise<TAB>class<TAB>path".
// Relative paths resolve against the manifest's directory. '#' starts a comment.
struct Manifest {
  std::vector<ManifestClip> clips;
  std::vector<ManifestNoise> noise;
  std::filesystem::path base;

  static Manifest parse(std::string_view text, const std::filesystem::path& base);
  static Manifest load(const std::filesystem::path& path);
  std::string to_text() const;

  std::set<std::string> speakers(Split split) const;
};

struct Clip {
  std::string speaker;
  Split split = Split::train;
  std::filesystem::path path;
  std::vector<float> samples;
};

// Manifest with audio loaded and the regime invariants checked:
//   open:   test speakers and train speakers are disjoint;
//   closed: every test speaker is a train speaker and no file is in both.
class Corpus {
 public:
  Corpus(const Manifest& manifest, Regime regime, int sample_rate);

  Regime regime() const { return regime_; }
  int sample_rate() const { return sample_rate_; }
  const std::vector<Clip>& clips() const { return clips_; }
  const std::vector<Clip>& noise() const { return noise_; }

  // Clips eligible as targets for a split: their speaker has another clip
  // to serve as reference.
  const std::vector<std::size_t>& targets(Split split) const;
  // Reference candidates for a target clip. Training targets only see train
  // clips; evaluation targets may draw from any other clip of the speaker.
  const std::vector<std::size_t>& references(std::size_t clip) const;
  // Clips of other speakers in the same split.
  std::vector<std::size_t> interferers(std::size_t clip) const;

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  Regime regime_;
  int sample_rate_;
  std::vector<Clip> clips_;
  std::vector<Clip> noise_;
  std::map<Split, std::vector<std::size_t>> targets_;
  std::vector<std::vector<std::size_t>> references_;
  std::vector<std::string> warnings_;
};

struct Episode {
  std::vector<float> mixture;
  std::vector<float> reference;
  std::vector<float> target;
  std::vector<float> noise;  // mixture == target + noise for every sample
  std::string speaker;
  double snr_db = 0.0;
  std::size_t target_clip = 0;
  std::size_t reference_clip = 0;
  std::size_t target_offset = 0;
  std::size_t interferer_clip = 0;  // valid for s+s and s+a
  std::size_t interferer_offset = 0;
};

struct EpisodeOptions {
  Split split = Split::train;
  MixtureType mixture = MixtureType::speech_speech;
  // Train episodes draw SNR ~ U[-4, 4] dB; evaluation episodes use 0 dB.
  bool training = true;
  double snr_low = -4.0, snr_high = 4.0;
  // 0 keeps the whole clip (full-length evaluation).
  std::size_t target_samples = 0;
  std::size_t reference_samples = 0;
  std::size_t crossfade_samples = 160;
};

Episode sample_episode(const Corpus& corpus, std::mt19937_64& rng, const EpisodeOptions& options);

}  // namespace avatr::audio
