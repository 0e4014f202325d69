#include "data/export.hpp"

#include <algorithm>
#include <cmath>

namespace spmkd {

Palette palette_from_name(const std::string& name) {
  if (name == "binary") return Palette::kBinary;
  if (name == "intensity") return Palette::kIntensity;
  throw ConfigError("palette must be binary|intensity, got '" + name + "'");
}

std::vector<std::uint8_t> render_map_rgb(const PressureMap& m, Palette palette, float peak) {
  if (!m.valid()) throw DimensionError("render_map_rgb: malformed map");
  for (float v : m.values) {
    if (!std::isfinite(v)) throw NumericError("render_map_rgb: non-finite pressure value");
  }
  std::vector<std::uint8_t> rgb(m.values.size() * 3);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    std::uint8_t level = 0;
    if (palette == Palette::kBinary) {
      level = m.values[i] > 0.0f ? 255 : 0;
    } else if (peak > 0.0f) {
      const float t = std::clamp(m.values[i] / peak, 0.0f, 1.0f);
      level = static_cast<std::uint8_t>(std::lround(t * 255.0f));
    }
    rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = level;
  }
  return rgb;
}

void export_png(const PressureMap& m, const std::string& path, Palette palette) {
  write_png_rgb8(path, m.size, m.size, render_map_rgb(m, palette, map_max(m)));
}

void export_side_by_side(const PressureMap& left, const PressureMap& right,
                         const std::string& path, Palette palette) {
  const float peak = std::max(map_max(left), map_max(right));
  const auto lrgb = render_map_rgb(left, palette, peak);
  const auto rrgb = render_map_rgb(right, palette, peak);

  const std::int64_t gutter = 4;
  const std::int64_t h = std::max(left.size, right.size);
  const std::int64_t w = left.size + gutter + right.size;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h * w * 3), 96);

  auto blit = [&](const std::vector<std::uint8_t>& src, std::int64_t size, std::int64_t x_off) {
    for (std::int64_t y = 0; y < size; ++y) {
      for (std::int64_t x = 0; x < size; ++x) {
        for (int c = 0; c < 3; ++c) {
          rgb[static_cast<std::size_t>((y * w + x_off + x) * 3 + c)] =
              src[static_cast<std::size_t>((y * size + x) * 3 + c)];
        }
      }
    }
  };
  blit(lrgb, left.size, 0);
  blit(rrgb, right.size, left.size + gutter);
  write_png_rgb8(path, h, w, rgb);
}

}  // namespace spmkd
