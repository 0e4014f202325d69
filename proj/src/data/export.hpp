#pragma once

// Human-readable renderings of pressure maps: a binary palette (any pressure
// -> white) and an intensity palette (lighter = greater pressure).

#include <cstdint>
#include <string>
#include <vector>

#include "data/pressure.hpp"

namespace spmkd {

enum class Palette {
  kBinary,
  kIntensity,
};

Palette palette_from_name(const std::string& name);  // ConfigError on unknown names

// Row-major RGB triples. `peak` fixes the value rendered as full white in the
// intensity palette; pass map_max(m) for a standalone image or a shared peak
// when several maps must be visually comparable.
std::vector<std::uint8_t> render_map_rgb(const PressureMap& m, Palette palette, float peak);

void export_png(const PressureMap& m, const std::string& path, Palette palette);

// Original on the left, reconstruction on the right, shared intensity scale,
// separated by a 4-pixel gray gutter. Maps may have different sizes; the
// smaller one is top-aligned.
void export_side_by_side(const PressureMap& left, const PressureMap& right,
                         const std::string& path, Palette palette);

}  // namespace spmkd
