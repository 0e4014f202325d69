#pragma once

// Square pressure maps and the resampling/quantization helpers shared by the
// generator, the training pipeline, and the PNG codecs. Pressure is stored in
// map units; kPressureFullScale is the value encoded as 65535 in 16-bit
// grayscale files, so files are comparable across generator configs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "core/error.hpp"
#include "core/tensor.hpp"
#include "data/png_io.hpp"

namespace spmkd {

inline constexpr float kPressureFullScale = 2.0f;

struct PressureMap {
  std::int64_t size = 0;            // square side
  std::vector<float> values;        // row-major, nonnegative

  bool valid() const {
    return size >= 1 && values.size() == static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
  }
};

inline float map_max(const PressureMap& m) {
  float mx = 0.0f;
  for (float v : m.values) mx = std::max(mx, v);
  return mx;
}

inline double map_sum(const PressureMap& m) {
  double s = 0;
  for (float v : m.values) s += v;
  return s;
}

// Block mean over non-overlapping windows; in.size must be a multiple of out_size.
inline PressureMap downsample_area(const PressureMap& in, std::int64_t out_size) {
  if (!in.valid()) throw DimensionError("downsample_area: malformed map");
  if (out_size < 1 || in.size % out_size != 0) {
    throw DimensionError("downsample_area: " + std::to_string(in.size) + " -> " +
                         std::to_string(out_size) + " is not an integer reduction");
  }
  const std::int64_t block = in.size / out_size;
  PressureMap out;
  out.size = out_size;
  out.values.assign(static_cast<std::size_t>(out_size * out_size), 0.0f);
  const double inv = 1.0 / static_cast<double>(block * block);
  for (std::int64_t y = 0; y < out_size; ++y) {
    for (std::int64_t x = 0; x < out_size; ++x) {
      double acc = 0;
      for (std::int64_t dy = 0; dy < block; ++dy) {
        for (std::int64_t dx = 0; dx < block; ++dx) {
          acc += in.values[static_cast<std::size_t>((y * block + dy) * in.size + (x * block + dx))];
        }
      }
      out.values[static_cast<std::size_t>(y * out_size + x)] = static_cast<float>(acc * inv);
    }
  }
  return out;
}

// Scales so the maximum becomes 1; an all-zero map stays zero.
inline PressureMap normalize_unit(const PressureMap& in) {
  if (!in.valid()) throw DimensionError("normalize_unit: malformed map");
  const float mx = map_max(in);
  PressureMap out = in;
  if (mx > 0.0f) {
    for (auto& v : out.values) v /= mx;
  }
  return out;
}

inline std::vector<std::uint8_t> presence_mask(const PressureMap& m) {
  std::vector<std::uint8_t> mask(m.values.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = m.values[i] > 0.0f ? 1 : 0;
  return mask;
}

inline Gray16Image quantize_map(const PressureMap& m) {
  if (!m.valid()) throw DimensionError("quantize_map: malformed map");
  Gray16Image img;
  img.height = img.width = m.size;
  img.pixels.resize(m.values.size());
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const float clamped = std::clamp(m.values[i], 0.0f, kPressureFullScale);
    img.pixels[i] = static_cast<std::uint16_t>(
        std::lround(static_cast<double>(clamped) / kPressureFullScale * 65535.0));
  }
  return img;
}

inline PressureMap dequantize_map(const Gray16Image& img) {
  if (img.height != img.width || img.height < 1) {
    throw DimensionError("dequantize_map: pressure images must be square");
  }
  PressureMap m;
  m.size = img.height;
  m.values.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    m.values[i] = static_cast<float>(img.pixels[i] / 65535.0 * kPressureFullScale);
  }
  return m;
}

template <typename T>
Tensor<T> map_to_tensor(const PressureMap& m) {
  if (!m.valid()) throw DimensionError("map_to_tensor: malformed map");
  std::vector<T> vals(m.values.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<T>(m.values[i]);
  return Tensor<T>::from({1, 1, m.size, m.size}, std::move(vals));
}

}  // namespace spmkd
