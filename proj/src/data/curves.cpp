#include "data/curves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "data/png_io.hpp"

namespace spmkd {

namespace {

struct Canvas {
  std::int64_t w, h;
  std::vector<std::uint8_t> rgb;

  Canvas(std::int64_t w_, std::int64_t h_)
      : w(w_), h(h_), rgb(static_cast<std::size_t>(w_ * h_ * 3), 255) {}

  void put(std::int64_t x, std::int64_t y, const std::uint8_t c[3]) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    std::uint8_t* p = rgb.data() + (y * w + x) * 3;
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  // Bresenham segment; endpoints may lie outside, put() clips.
  void line(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1,
            const std::uint8_t c[3]) {
    const std::int64_t dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const std::int64_t dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    std::int64_t err = dx + dy;
    while (true) {
      put(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const std::int64_t e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

// 5x7 glyphs, bit 4 = leftmost column. Lowercase letters, digits, and the
// punctuation that appears in column names and %.3g numbers.
struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

const Glyph kFont[] = {
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'a', {0x00, 0x00, 0x0e, 0x01, 0x0f, 0x11, 0x0f}},
    {'b', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x1e}},
    {'c', {0x00, 0x00, 0x0e, 0x10, 0x10, 0x11, 0x0e}},
    {'d', {0x01, 0x01, 0x0d, 0x13, 0x11, 0x11, 0x0f}},
    {'e', {0x00, 0x00, 0x0e, 0x11, 0x1f, 0x10, 0x0e}},
    {'f', {0x06, 0x09, 0x08, 0x1c, 0x08, 0x08, 0x08}},
    {'g', {0x00, 0x0f, 0x11, 0x11, 0x0f, 0x01, 0x0e}},
    {'h', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11}},
    {'i', {0x04, 0x00, 0x0c, 0x04, 0x04, 0x04, 0x0e}},
    {'j', {0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0c}},
    {'k', {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}},
    {'l', {0x0c, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'m', {0x00, 0x00, 0x1a, 0x15, 0x15, 0x11, 0x11}},
    {'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}},
    {'o', {0x00, 0x00, 0x0e, 0x11, 0x11, 0x11, 0x0e}},
    {'p', {0x00, 0x00, 0x1e, 0x11, 0x1e, 0x10, 0x10}},
    {'q', {0x00, 0x00, 0x0d, 0x13, 0x0f, 0x01, 0x01}},
    {'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
    {'s', {0x00, 0x00, 0x0e, 0x10, 0x0e, 0x01, 0x1e}},
    {'t', {0x08, 0x08, 0x1c, 0x08, 0x08, 0x09, 0x06}},
    {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0d}},
    {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'w', {0x00, 0x00, 0x11, 0x11, 0x15, 0x15, 0x0a}},
    {'x', {0x00, 0x00, 0x11, 0x0a, 0x04, 0x0a, 0x11}},
    {'y', {0x00, 0x00, 0x11, 0x11, 0x0f, 0x01, 0x0e}},
    {'z', {0x00, 0x00, 0x1f, 0x02, 0x04, 0x08, 0x1f}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0c, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
    {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
  if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  for (const auto& g : kFont) {
    if (g.ch == c) return &g;
  }
  return nullptr;
}

void draw_text(Canvas& cv, std::int64_t x, std::int64_t y, const std::string& text,
               const std::uint8_t c[3]) {
  for (char ch : text) {
    const Glyph* g = find_glyph(ch);
    if (g) {
      for (int r = 0; r < 7; ++r) {
        for (int b = 0; b < 5; ++b) {
          if (g->rows[r] & (1 << (4 - b))) cv.put(x + b, y + r, c);
        }
      }
    }
    x += 6;
  }
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

const std::uint8_t kBlack[3] = {20, 20, 20};
const std::uint8_t kGrid[3] = {225, 225, 225};
const std::uint8_t kSeriesColors[][3] = {
    {208, 52, 52}, {46, 102, 208}, {36, 150, 86}, {222, 150, 32}, {140, 70, 190}, {60, 170, 180},
};

}  // namespace

void export_curves(const CsvTable& table, const std::string& path, const CurveStyle& style) {
  if (table.rows.empty()) throw StateError("curves: no data rows to plot");
  const std::size_t xi = table.column_index(style.x_column);
  std::vector<std::size_t> series;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i != xi) series.push_back(i);
  }
  if (series.empty()) throw StateError("curves: nothing to plot besides the x column");

  double xmin = table.rows.front()[xi], xmax = xmin;
  double ymin = table.rows.front()[series.front()], ymax = ymin;
  for (const auto& row : table.rows) {
    xmin = std::min(xmin, row[xi]);
    xmax = std::max(xmax, row[xi]);
    for (std::size_t s : series) {
      ymin = std::min(ymin, row[s]);
      ymax = std::max(ymax, row[s]);
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const std::int64_t W = style.width, H = style.height;
  const std::int64_t left = 64, right = W - 16, top = 16, bottom = H - 36;
  Canvas cv(W, H);

  auto px = [&](double x) {
    return left + static_cast<std::int64_t>(
                      std::lround((x - xmin) / (xmax - xmin) * static_cast<double>(right - left)));
  };
  auto py = [&](double y) {
    return bottom - static_cast<std::int64_t>(
                        std::lround((y - ymin) / (ymax - ymin) * static_cast<double>(bottom - top)));
  };

  for (int i = 1; i < 4; ++i) {
    const std::int64_t gy = top + (bottom - top) * i / 4;
    cv.line(left, gy, right, gy, kGrid);
  }
  cv.line(left, top, left, bottom, kBlack);
  cv.line(left, bottom, right, bottom, kBlack);

  draw_text(cv, left - 58, py(ymax) - 3, fmt3(ymax), kBlack);
  draw_text(cv, left - 58, py(ymin) - 3, fmt3(ymin), kBlack);
  draw_text(cv, px(xmin) - 3, bottom + 6, fmt3(xmin), kBlack);
  draw_text(cv, px(xmax) - 20, bottom + 6, fmt3(xmax), kBlack);
  draw_text(cv, (left + right) / 2 - 3 * static_cast<std::int64_t>(style.x_column.size()),
            bottom + 18, style.x_column, kBlack);

  for (std::size_t si = 0; si < series.size(); ++si) {
    const std::uint8_t* color = kSeriesColors[si % (sizeof(kSeriesColors) / sizeof(*kSeriesColors))];
    const std::size_t col = series[si];
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
      cv.line(px(table.rows[r - 1][xi]), py(table.rows[r - 1][col]), px(table.rows[r][xi]),
              py(table.rows[r][col]), color);
    }
    const std::int64_t ly = top + 6 + static_cast<std::int64_t>(si) * 12;
    cv.line(left + 8, ly + 3, left + 24, ly + 3, color);
    draw_text(cv, left + 30, ly, table.columns[col], kBlack);
  }

  write_png_rgb8(path, H, W, cv.rgb);
}

}  // namespace spmkd
