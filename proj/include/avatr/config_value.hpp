#pragma once

// Text <-> value conversions shared by the key=value config sections.
// `key` is the fully qualified name used in error messages.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace avatr::config {

std::size_t parse_size(std::string_view key, std::string_view value);
std::uint64_t parse_u64(std::string_view key, std::string_view value);
double parse_double(std::string_view key, std::string_view value);
bool parse_switch(std::string_view key, std::string_view value);
// Shortest text that parses back to the same double.
std::string format_double(double d);

}  // namespace avatr::config
