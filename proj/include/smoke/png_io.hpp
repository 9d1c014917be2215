#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smoke/image.hpp"

namespace smoke {

/// Reads an 8-bit PNG. Gray stays 1-channel, palette/RGB/RGBA are expanded
/// to RGB (alpha stripped), 16-bit files are reduced to 8. Throws
/// std::runtime_error with the path on any decode failure.
ImageU8 read_png(const std::string& path);

/// Writes an 8-bit PNG (1 or 3 channels). `provenance`, when non-empty, is
/// stored as a tEXt chunk under the key "provenance".
void write_png(const std::string& path, const ImageU8& img,
               const std::string& provenance = "");

/// 16-bit grayscale PNG (used for label maps).
void write_png16(const std::string& path, const std::vector<std::uint16_t>& px,
                 int h, int w, const std::string& provenance = "");
std::vector<std::uint16_t> read_png16(const std::string& path, int* h, int* w);

}  // namespace smoke
