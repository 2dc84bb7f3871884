#pragma once

// Checkpoint layout (little-endian):
//   "A0RC" | u32 version (1)
//   i32 image_size, patch, dim, enc_layers, dec_layers, heads, classes, mlp_ratio
//   u8 align_quat_sign | u32 block count
//   per block: u32 name length | name bytes | u32 rank | u32 extents[rank] | f32 values
// Parameters are stored as f32; loading rounds to the nearest float.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "covis/net/model.hpp"

namespace covis::net {

std::vector<std::uint8_t> encode_checkpoint(const ModelParameters& params);
/// Throws FormatError on malformed input or blocks that do not match the
/// parameter layout implied by the stored config.
ModelParameters decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params);
ModelParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace covis::net
