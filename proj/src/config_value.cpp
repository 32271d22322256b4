#include "avatr/config_value.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "avatr/error.hpp"

namespace avatr::config {

namespace {

template <typename U>
U parse_unsigned(std::string_view key, std::string_view v) {
  U out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

}  // namespace

std::size_t parse_size(std::string_view key, std::string_view v) { return parse_unsigned<std::size_t>(key, v); }
std::uint64_t parse_u64(std::string_view key, std::string_view v) { return parse_unsigned<std::uint64_t>(key, v); }

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(std::string(v), &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument("bad");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
}

bool parse_switch(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(std::string(key) + ": expected on|off, got '" + std::string(v) + "'");
}

std::string format_double(double d) {
  for (int precision = 6; precision <= 17; ++precision) {
    std::ostringstream os;
    os.precision(precision);
    os << d;
    if (std::stod(os.str()) == d) return os.str();
  }
  return std::to_string(d);
}

}  // namespace avatr::config
