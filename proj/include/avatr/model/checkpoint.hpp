#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "avatr/model/avatr.hpp"

namespace avatr::model {

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Layout: "AVTR", u16 version, u32 config length, config text, u32 record
// count, then per record: u32 name length, name, u32 rank, u32 extents,
// float32 data. All integers and floats little-endian.
std::vector<std::uint8_t> save_checkpoint(AvatrModel<float>& model);
AvatrModel<float> load_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint_file(AvatrModel<float>& model, const std::filesystem::path& path);
AvatrModel<float> load_checkpoint_file(const std::filesystem::path& path);

}  // namespace avatr::model
