#include "avatr/audio/mix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "avatr/error.hpp"

namespace avatr::audio {

namespace {

template <typename T>
double mean_square(std::span<const T> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (T v : x) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc / static_cast<double>(x.size());
}

}  // namespace

double power(std::span<const double> x) { return mean_square(x); }
double power(std::span<const float> x) { return mean_square(x); }

double snr_db(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(power(signal) / power(noise));
}

Mixture mix_at_snr(std::span<const double> s, std::span<const double> n, double snr) {
  if (s.size() != n.size())
    throw DataError("mix_at_snr: length mismatch " + std::to_string(s.size()) + " vs " + std::to_string(n.size()));
  const double ps = power(s), pn = power(n);
  if (!(ps > 0.0)) throw DataError("mix_at_snr: target has zero power");
  if (!(pn > 0.0)) throw DataError("mix_at_snr: noise has zero power");
  if (!std::isfinite(snr)) throw DataError("mix_at_snr: snr must be finite");
  Mixture m;
  m.gain = std::sqrt(ps / pn) * std::pow(10.0, -snr / 20.0);
  m.target.assign(s.begin(), s.end());
  m.noise.resize(n.size());
  m.mixture.resize(n.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    m.noise[i] = m.gain * n[i];
    m.mixture[i] = m.target[i] + m.noise[i];
    peak = std::max(peak, std::abs(m.mixture[i]));
  }
  if (peak > 1.0) {
    m.rescale = 1.0 / peak;
    for (std::size_t i = 0; i < n.size(); ++i) {
      m.target[i] *= m.rescale;
      m.noise[i] *= m.rescale;
      m.mixture[i] = m.target[i] + m.noise[i];
    }
  }
  return m;
}

std::vector<double> fit_length(std::span<const float> clip, std::size_t length, std::size_t crossfade,
                               std::mt19937_64& rng, std::size_t* offset) {
  if (clip.empty()) throw DataError("fit_length: empty clip");
  std::vector<double> out(length, 0.0);
  if (offset) *offset = 0;
  if (clip.size() >= length) {
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, clip.size() - length)(rng);
    if (offset) *offset = start;
    std::copy(clip.begin() + start, clip.begin() + start + length, out.begin());
    return out;
  }
  const std::size_t fade = std::min(crossfade, clip.size() / 2);
  const std::size_t hop = clip.size() - fade;
  for (std::size_t at = 0; at < length; at += hop) {
    for (std::size_t i = 0; i < clip.size() && at + i < length; ++i) {
      if (at > 0 && i < fade) {
        const double w = static_cast<double>(i + 1) / (fade + 1);
        out[at + i] = out[at + i] * (1.0 - w) + clip[i] * w;
      } else {
        out[at + i] = clip[i];
      }
    }
  }
  return out;
}

}  // namespace avatr::audio
