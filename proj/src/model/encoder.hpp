#pragma once

// Keypoint encoder: a reduced strided-conv backbone (stride-4 total) with a
// residual bottleneck block and two conv heads producing keypoint logits H
// and per-pixel features F. The positional grid C is a deterministic
// function of the grid size, not a learned tensor.

#include <cstdint>
#include <string>
#include <vector>

#include "core/opcount.hpp"
#include "core/ops.hpp"
#include "core/tensor.hpp"
#include "model/layers.hpp"

namespace spmkd {

struct EncoderConfig {
  std::int64_t k = 14;          // keypoint channels
  std::int64_t f = 8;           // feature channels
  std::vector<std::int64_t> widths = {16, 32};
  std::int64_t input_size = 256;  // square input; grid = input_size / 4

  std::int64_t grid() const { return input_size / 4; }

  void validate() const {
    if (k < 1 || f < 1) throw ConfigError("encoder: k and f must be >= 1");
    if (widths.size() != 2 || widths[0] < 1 || widths[1] < 1) {
      throw ConfigError("encoder: widths must be two positive integers (one per stride-2 stage)");
    }
    const std::int64_t g = input_size / 4;
    if (input_size % 4 != 0 || g < 4 || (g & (g - 1)) != 0) {
      throw ConfigError("encoder: input_size must be 4 * (power of two >= 4), got " +
                        std::to_string(input_size));
    }
  }
};

// Row channel = r/(h-1), column channel = c/(w-1), third channel constant 1
// (homogeneous coordinate).
template <typename T>
Tensor<T> make_positional_grid(std::int64_t h, std::int64_t w) {
  if (h < 1 || w < 1) throw DimensionError("positional grid dims must be >= 1");
  std::vector<T> vals(static_cast<std::size_t>(3 * h * w));
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      vals[r * w + c] = h == 1 ? T(0) : static_cast<T>(r) / static_cast<T>(h - 1);
      vals[h * w + r * w + c] = w == 1 ? T(0) : static_cast<T>(c) / static_cast<T>(w - 1);
      vals[2 * h * w + r * w + c] = T(1);
    }
  }
  return Tensor<T>::from({3, h, w}, std::move(vals));
}

template <typename T>
struct EncoderOut {
  Tensor<T> heatmap;   // (1, k, g, g) pre-activation logits
  Tensor<T> features;  // (1, f, g, g)
};

template <typename T>
class Encoder {
 public:
  Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const auto w0 = cfg_.widths[0], w1 = cfg_.widths[1];
    conv1_ = Conv2dLayer<T>(1, w0, 3, 2, 1, 1, seed, "encoder.conv1");
    conv2_ = Conv2dLayer<T>(w0, w1, 3, 2, 1, 1, seed, "encoder.conv2");
    expand_ = Conv2dLayer<T>(w1, 2 * w1, 1, 1, 0, 1, seed, "encoder.block.expand");
    mid_ = Conv2dLayer<T>(2 * w1, 2 * w1, 3, 1, 1, 1, seed, "encoder.block.mid");
    project_ = Conv2dLayer<T>(2 * w1, w1, 1, 1, 0, 1, seed, "encoder.block.project");
    head_h_ = Conv2dLayer<T>(w1, cfg_.k, 3, 1, 1, 1, seed, "encoder.head_h");
    head_f_ = Conv2dLayer<T>(w1, cfg_.f, 3, 1, 1, 1, seed, "encoder.head_f");
  }

  const EncoderConfig& config() const { return cfg_; }

  EncoderOut<T> forward(const Tensor<T>& x) const {
    const Shape expected = {1, 1, cfg_.input_size, cfg_.input_size};
    if (x.shape() != expected) {
      throw DimensionError("encoder: expected input " + shape_str(expected) + ", got " + shape_str(x.shape()));
    }
    auto a1 = relu(conv1_.forward(x));
    auto a2 = relu(conv2_.forward(a1));
    auto e = relu(expand_.forward(a2));
    auto m = relu(mid_.forward(e));
    auto b = relu(add(project_.forward(m), a2));
    return {head_h_.forward(b), head_f_.forward(b)};
  }

  ParamList<T> named_params(const std::string& prefix = "encoder") const {
    ParamList<T> out;
    conv1_.collect(prefix + ".conv1", out);
    conv2_.collect(prefix + ".conv2", out);
    expand_.collect(prefix + ".block.expand", out);
    mid_.collect(prefix + ".block.mid", out);
    project_.collect(prefix + ".block.project", out);
    head_h_.collect(prefix + ".head_h", out);
    head_f_.collect(prefix + ".head_f", out);
    return out;
  }

  ModelDesc describe(const std::string& prefix = "encoder") const {
    const std::int64_t s = cfg_.input_size, half = s / 2, g = cfg_.grid();
    return {
        conv1_.describe(prefix + ".conv1", s, s),
        conv2_.describe(prefix + ".conv2", half, half),
        expand_.describe(prefix + ".block.expand", g, g),
        mid_.describe(prefix + ".block.mid", g, g),
        project_.describe(prefix + ".block.project", g, g),
        head_h_.describe(prefix + ".head_h", g, g),
        head_f_.describe(prefix + ".head_f", g, g),
    };
  }

 private:
  EncoderConfig cfg_;
  Conv2dLayer<T> conv1_, conv2_, expand_, mid_, project_, head_h_, head_f_;
};

}  // namespace spmkd
