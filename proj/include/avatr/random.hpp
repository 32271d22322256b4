#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace avatr {

// Generator for draw `index` of the stream `name` under a top-level seed.
// Streams with different names or indices are independent of one another,
// so components can be reseeded or reordered without disturbing the rest.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace avatr
