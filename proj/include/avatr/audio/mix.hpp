#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace avatr::audio {

double power(std::span<const double> x);
double power(std::span<const float> x);
double snr_db(std::span<const double> signal, std::span<const double> noise);

struct Mixture {
  std::vector<double> mixture;  // target + noise, element for element
  std::vector<double> target;
  std::vector<double> noise;    // gain-scaled interference
  double gain = 0.0;
  double rescale = 1.0;  // joint factor applied to all three when the sum clipped
};

// Gain g = sqrt(Ps / Pn) * 10^(-snr/20). If the sum peaks above 1 the three
// signals are scaled jointly so it fits.
Mixture mix_at_snr(std::span<const double> s, std::span<const double> n, double snr_db);

// Loops a short clip with a linear crossfade, or randomly crops a long one
// (the crop start is stored in *offset when given).
std::vector<double> fit_length(std::span<const float> clip, std::size_t length, std::size_t crossfade,
                               std::mt19937_64& rng, std::size_t* offset = nullptr);

}  // namespace avatr::audio
