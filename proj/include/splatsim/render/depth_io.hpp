#pragma once

// Depth raster file: 16-byte header then float32 row-major samples.
//   bytes 0..3   magic "SDPT"
//   bytes 4..7   width  (uint32, little-endian)
//   bytes 8..11  height (uint32, little-endian)
//   bytes 12..15 sentinel (float32)

#include "splatsim/io/raster.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace splatsim {

inline constexpr std::array<char, 4> kDepthMagic = {'S', 'D', 'P', 'T'};

inline void save_depth_map(const DepthMap& d, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const std::uint32_t w = std::uint32_t(d.width()), h = std::uint32_t(d.height());
  out.write(kDepthMagic.data(), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(&d.sentinel), 4);
  out.write(reinterpret_cast<const char*>(d.depth.data.data()), std::streamsize(d.depth.size() * sizeof(float)));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline DepthMap load_depth_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::array<char, 4> magic{};
  std::uint32_t w = 0, h = 0;
  float sentinel = 0;
  in.read(magic.data(), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  in.read(reinterpret_cast<char*>(&sentinel), 4);
  if (!in || magic != kDepthMagic) throw FormatError("'" + path.string() + "' is not a depth raster");
  DepthMap d(int(w), int(h), sentinel);
  in.read(reinterpret_cast<char*>(d.depth.data.data()), std::streamsize(d.depth.size() * sizeof(float)));
  if (!in) throw FormatError("'" + path.string() + "': truncated depth data");
  return d;
}

}  // namespace splatsim
