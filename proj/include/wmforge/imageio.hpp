#pragma once

#include "wmforge/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace wmforge {

// Files carry 8-bit samples; everything in memory is unit-interval float.
// Quantization happens only here, at the file boundary.
std::vector<std::uint8_t> quantize8(const Image& img);
Image from_bytes(const std::vector<std::uint8_t>& bytes, int h, int w, int c);

void write_png(const std::string& path, const Image& img);
void write_png8(const std::string& path, const std::vector<std::uint8_t>& bytes, int h, int w, int c);
void write_ppm(const std::string& path, const Image& img);

// Dispatches on magic bytes; accepts our PNGs (plus common 8-bit variants)
// and binary PPM/PGM.
Image read_image(const std::string& path);

bool has_extension(const std::string& path, const std::string& ext);

} // namespace wmforge
