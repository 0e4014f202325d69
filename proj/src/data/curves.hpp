#pragma once

// Loss-curve rendering: every non-x column of a metrics CSV becomes one
// polyline in a PNG, with axes, min/max tick labels, and a legend drawn with
// a built-in 5x7 bitmap font. No external plotting dependency.

#include <string>

#include "train/metrics.hpp"

namespace spmkd {

struct CurveStyle {
  std::int64_t width = 720;
  std::int64_t height = 480;
  std::string x_column = "epoch";
};

void export_curves(const CsvTable& table, const std::string& path,
                   const CurveStyle& style = CurveStyle());

}  // namespace spmkd
