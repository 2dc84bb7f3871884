#pragma once

// Binary file formats.
//
// CUB3 label map (all integers little-endian):
//   "CUB3" | u8 version = 1 | u16 width | u16 height | u8 class scheme |
//   repeated (u8 label, u32 run) covering width * height pixels row-major.
// Runs are maximal, so equal maps always encode to equal bytes.
//
// PFM depth: "Pf" header, scale -1.0 (little-endian), bottom-to-top rows of
// f32. Invalid depth is written as 0.0.
//
// PGM (P5, maxval 255) carries the raw label values; PPM (P6) is used for
// color images and overlays.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covis/covisibility.hpp"
#include "covis/geom3d.hpp"

namespace covis {

inline constexpr std::uint8_t kCub3Version = 1;

std::vector<std::uint8_t> encode_covis(const CovisMap& map);
/// Throws FormatError on bad magic/version, truncation, trailing bytes, bad
/// labels or runs that do not cover the image exactly.
CovisMap decode_covis(std::span<const std::uint8_t> bytes);

void write_covis(const std::filesystem::path& path, const CovisMap& map);
CovisMap read_covis(const std::filesystem::path& path);

void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_pfm(const std::filesystem::path& path);

void write_label_pgm(const std::filesystem::path& path, const CovisMap& map);

/// 8-bit interleaved RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::array<std::uint8_t, 3> pixel(int x, int y) const;
};

void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

/// Overlay colors: covisible green, occluded orange, outside-FOV gray,
/// ignore black. Two-class maps use the covisible color for 0 and the
/// outside-FOV color for 1.
std::array<std::uint8_t, 3> label_color(CovisLabel label, ClassScheme scheme = ClassScheme::ThreeClass);

/// Label colors, alpha-blended 0.5 over `source` when given.
RgbImage render_overlay(const CovisMap& map, const std::optional<RgbImage>& source = std::nullopt);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace covis
