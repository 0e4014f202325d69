#pragma once

// Thin libpng wrappers for the two pixel formats the project emits:
// 16-bit grayscale (pressure payloads) and 8-bit RGB (human-readable
// renderings). validate_png_file() walks the chunk layout by hand and checks
// every CRC, so corruption is reported with a byte offset instead of a
// libpng longjmp.

#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace spmkd {

struct Gray16Image {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint16_t> pixels;  // row-major
};

void write_png_gray16(const std::string& path, const Gray16Image& img);
Gray16Image read_png_gray16(const std::string& path);

// rgb is row-major, 3 bytes per pixel.
void write_png_rgb8(const std::string& path, std::int64_t height, std::int64_t width,
                    const std::vector<std::uint8_t>& rgb);

void validate_png_file(const std::string& path);

}  // namespace spmkd
