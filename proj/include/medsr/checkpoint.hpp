#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "medsr/srnet.hpp"

namespace medsr {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

// Binary layout (all integers little-endian), see docs/checkpoint-format.md:
//   "MEDSRCKP" | u32 version | u32 n, config JSON (n bytes)
//   u32 array count | per array: u32 n, name | u32 rank | u32 dims[rank] | f32 data
std::vector<std::uint8_t> serialize_checkpoint(const SRNet& net);
SRNet deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const SRNet& net, const std::filesystem::path& path);
SRNet load_checkpoint(const std::filesystem::path& path);

}  // namespace medsr
