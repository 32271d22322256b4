#include "avatr/audio/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "avatr/audio/mix.hpp"
#include "avatr/error.hpp"

namespace avatr::audio {

Regime parse_regime(std::string_view text) {
  if (text == "open") return Regime::open;
  if (text == "closed") return Regime::closed;
  throw ConfigError("unknown regime '" + std::string(text) + "' (expected open|closed)");
}

MixtureType parse_mixture(std::string_view text) {
  if (text == "s+n") return MixtureType::speech_noise;
  if (text == "s+s") return MixtureType::speech_speech;
  if (text == "s+a") return MixtureType::speech_both;
  throw ConfigError("unknown mixture type '" + std::string(text) + "' (expected s+s|s+n|s+a)");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw DataError("unknown split '" + std::string(text) + "' (expected train|val|test)");
}

std::string_view to_string(Regime r) { return r == Regime::open ? "open" : "closed"; }

std::string_view to_string(MixtureType m) {
  switch (m) {
    case MixtureType::speech_noise: return "s+n";
    case MixtureType::speech_speech: return "s+s";
    case MixtureType::speech_both: return "s+a";
  }
  return "?";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Manifest Manifest::parse(std::string_view text, const std::filesystem::path& base) {
  Manifest m;
  m.base = base;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
      throw DataError("manifest line " + std::to_string(number) + ": expected 3 tab-separated fields");
    const std::string kind = line.substr(0, t1), label = line.substr(t1 + 1, t2 - t1 - 1);
    std::filesystem::path path = line.substr(t2 + 1);
    if (label.empty() || path.empty()) throw DataError("manifest line " + std::to_string(number) + ": empty field");
    if (kind == "noise") {
      m.noise.push_back({label, path});
    } else {
      try {
        m.clips.push_back({parse_split(kind), label, path});
      } catch (const DataError& e) {
        throw DataError("manifest line " + std::to_string(number) + ": " + e.what());
      }
    }
  }
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

std::string Manifest::to_text() const {
  std::string out;
  for (const auto& c : clips)
    out += std::string(to_string(c.split)) + '\t' + c.speaker + '\t' + c.path.generic_string() + '\n';
  for (const auto& n : noise) out += "noise\t" + n.noise_class + '\t' + n.path.generic_string() + '\n';
  return out;
}

std::set<std::string> Manifest::speakers(Split split) const {
  std::set<std::string> out;
  for (const auto& c : clips)
    if (c.split == split) out.insert(c.speaker);
  return out;
}

namespace {

std::vector<float> load_samples(const std::filesystem::path& path, int rate) {
  Waveform w = read_wav(path, rate);
  if (w.samples.empty()) throw DataError("clip " + path.string() + " is empty");
  return std::move(w.samples);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace

Corpus::Corpus(const Manifest& manifest, Regime regime, int sample_rate)
    : regime_(regime), sample_rate_(sample_rate) {
  const auto train = manifest.speakers(Split::train);
  const auto test = manifest.speakers(Split::test);
  if (regime == Regime::open) {
    std::vector<std::string> shared;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(shared));
    if (!shared.empty())
      throw DataError("open-set manifest has speakers in both train and test: " + join(shared));
  } else {
    std::vector<std::string> unseen;
    std::set_difference(test.begin(), test.end(), train.begin(), train.end(), std::back_inserter(unseen));
    if (!unseen.empty())
      throw DataError("closed-set manifest has test speakers absent from train: " + join(unseen));
    std::set<std::filesystem::path> train_files;
    for (const auto& c : manifest.clips)
      if (c.split == Split::train) train_files.insert(c.path.lexically_normal());
    for (const auto& c : manifest.clips)
      if (c.split != Split::train && train_files.count(c.path.lexically_normal()))
        throw DataError("closed-set manifest reuses training clip " + c.path.string() + " in " +
                        std::string(to_string(c.split)));
  }

  for (const auto& c : manifest.clips) {
    const auto path = c.path.is_absolute() ? c.path : manifest.base / c.path;
    clips_.push_back({c.speaker, c.split, c.path, load_samples(path, sample_rate)});
  }
  for (const auto& n : manifest.noise) {
    const auto path = n.path.is_absolute() ? n.path : manifest.base / n.path;
    noise_.push_back({n.noise_class, Split::train, n.path, load_samples(path, sample_rate)});
  }

  references_.resize(clips_.size());
  for (Split split : {Split::train, Split::val, Split::test}) targets_[split];
  for (std::size_t i = 0; i < clips_.size(); ++i) {
    for (std::size_t j = 0; j < clips_.size(); ++j) {
      if (i == j || clips_[j].speaker != clips_[i].speaker) continue;
      if (clips_[i].split == Split::train && clips_[j].split != Split::train) continue;
      references_[i].push_back(j);
    }
    if (references_[i].empty())
      warnings_.push_back("speaker " + clips_[i].speaker + ": clip " + clips_[i].path.string() +
                          " has no other clip to serve as reference; skipped as target");
    else
      targets_[clips_[i].split].push_back(i);
  }
}

const std::vector<std::size_t>& Corpus::targets(Split split) const { return targets_.at(split); }

const std::vector<std::size_t>& Corpus::references(std::size_t clip) const { return references_.at(clip); }

std::vector<std::size_t> Corpus::interferers(std::size_t clip) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < clips_.size(); ++j)
    if (clips_[j].split == clips_[clip].split && clips_[j].speaker != clips_[clip].speaker) out.push_back(j);
  return out;
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

std::vector<float> crop(const std::vector<float>& x, std::size_t length, std::mt19937_64& rng, std::size_t& offset) {
  offset = 0;
  if (length == 0 || x.size() <= length) return x;
  offset = std::uniform_int_distribution<std::size_t>(0, x.size() - length)(rng);
  return std::vector<float>(x.begin() + offset, x.begin() + offset + length);
}

}  // namespace

Episode sample_episode(const Corpus& corpus, std::mt19937_64& rng, const EpisodeOptions& options) {
  const auto& candidates = corpus.targets(options.split);
  if (candidates.empty())
    throw DataError("no usable target clips in split " + std::string(to_string(options.split)));
  Episode e;
  e.target_clip = pick(candidates, rng);
  const Clip& target_clip = corpus.clips()[e.target_clip];
  e.speaker = target_clip.speaker;
  e.reference_clip = pick(corpus.references(e.target_clip), rng);
  const auto target = crop(target_clip.samples, options.target_samples, rng, e.target_offset);
  std::size_t ref_offset = 0;
  e.reference = crop(corpus.clips()[e.reference_clip].samples, options.reference_samples, rng, ref_offset);

  const std::size_t n = target.size();
  std::vector<double> bundle;
  if (options.mixture != MixtureType::speech_noise) {
    const auto others = corpus.interferers(e.target_clip);
    if (others.empty())
      throw DataError("mixture " + std::string(to_string(options.mixture)) + " needs a second speaker in split " +
                      std::string(to_string(options.split)));
    e.interferer_clip = pick(others, rng);
    bundle = fit_length(corpus.clips()[e.interferer_clip].samples, n, options.crossfade_samples, rng,
                        &e.interferer_offset);
  }
  if (options.mixture != MixtureType::speech_speech) {
    if (corpus.noise().empty())
      throw DataError("mixture " + std::string(to_string(options.mixture)) + " needs at least one noise clip");
    auto ambient = fit_length(pick(corpus.noise(), rng).samples, n, options.crossfade_samples, rng);
    if (bundle.empty()) {
      bundle = std::move(ambient);
    } else {
      // Ambient noise joins the interfering speech at equal power.
      const double pa = power(ambient), pb = power(bundle);
      const double scale = pa > 0.0 ? std::sqrt(pb / pa) : 0.0;
      for (std::size_t i = 0; i < n; ++i) bundle[i] += scale * ambient[i];
    }
  }

  e.snr_db = options.training ? std::uniform_real_distribution<double>(options.snr_low, options.snr_high)(rng) : 0.0;
  const std::vector<double> s(target.begin(), target.end());
  const Mixture m = mix_at_snr(s, bundle, e.snr_db);
  e.target.resize(n);
  e.noise.resize(n);
  e.mixture.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    e.target[i] = static_cast<float>(m.target[i]);
    e.noise[i] = static_cast<float>(m.noise[i]);
    e.mixture[i] = e.target[i] + e.noise[i];
  }
  return e;
}

}  // namespace avatr::audio
