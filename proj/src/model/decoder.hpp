#pragma once

// Reconstruction decoder: fully connected stem to a low-resolution feature
// map, a four-block backbone alternating Expansion layers (parallel dilated
// convs + x2 upsample) and Exchange layers (all-pairs fusion of four routes
// at widths w0..w3 and resolutions g, g/2, g/4, g/8), then a two-conv head.
// The head namespace is the unit swapped between training phases.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/opcount.hpp"
#include "core/ops.hpp"
#include "core/tensor.hpp"
#include "model/layers.hpp"

namespace spmkd {

enum class HeadMode {
  kClassification,  // 2 output channels, per-pixel channel softmax
  kRegression,      // 1 output channel, linear
};

struct DecoderConfig {
  std::int64_t c0 = 16;
  std::vector<std::int64_t> widths = {64, 128, 256, 512};
  std::vector<std::int64_t> dilations = {1, 3, 5};
  double width_mult = 1.0;
  HeadMode head = HeadMode::kClassification;
  std::int64_t grid = 64;               // backbone output resolution
  std::int64_t output_resolution = 64;  // grid, or 4*grid via two extra expansions

  std::int64_t scaled(std::int64_t w) const {
    const auto s = static_cast<std::int64_t>(w * width_mult + 0.5);
    return s < 1 ? 1 : s;
  }
  std::int64_t head_channels() const { return head == HeadMode::kClassification ? 2 : 1; }

  void validate() const {
    if (widths.size() != 4) throw ConfigError("decoder: exactly 4 route widths required");
    for (auto w : widths) {
      if (w < 1) throw ConfigError("decoder: route widths must be >= 1");
    }
    if (dilations.size() != 3) throw ConfigError("decoder: exactly 3 dilation rates required");
    for (auto d : dilations) {
      if (d < 1) throw ConfigError("decoder: dilation rates must be >= 1");
    }
    if (c0 < 1) throw ConfigError("decoder: c0 must be >= 1");
    if (width_mult <= 0.0 || width_mult > 1.0) throw ConfigError("decoder: width_mult must be in (0,1]");
    if (grid < 4 || (grid & (grid - 1)) != 0) {
      throw ConfigError("decoder: grid must be a power of two >= 4, got " + std::to_string(grid));
    }
    if (output_resolution != grid && output_resolution != 4 * grid) {
      throw ConfigError("decoder: output_resolution must be grid or 4*grid");
    }
  }
};

// Three parallel dilated conv branches (size-preserving, pad = dilation),
// summed, then bilinear x2. Purely linear; activations live in the caller.
template <typename T>
struct ExpansionLayer {
  std::vector<Conv2dLayer<T>> branches;

  ExpansionLayer() = default;
  ExpansionLayer(std::int64_t in_c, std::int64_t out_c, const std::vector<std::int64_t>& dilations,
                 std::uint64_t seed, const std::string& name) {
    for (std::size_t i = 0; i < dilations.size(); ++i) {
      const auto d = dilations[i];
      branches.emplace_back(in_c, out_c, 3, 1, d, d, seed, name + ".branch" + std::to_string(i));
    }
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    auto acc = branches[0].forward(x);
    for (std::size_t i = 1; i < branches.size(); ++i) acc = add(acc, branches[i].forward(x));
    return upsample_bilinear(acc, 2);
  }

  void collect(const std::string& name, ParamList<T>& out) const {
    for (std::size_t i = 0; i < branches.size(); ++i) {
      branches[i].collect(name + ".branch" + std::to_string(i), out);
    }
  }

  void describe(const std::string& name, std::int64_t in_res, ModelDesc& out) const {
    for (std::size_t i = 0; i < branches.size(); ++i) {
      out.push_back(branches[i].describe(name + ".branch" + std::to_string(i), in_res, in_res));
    }
    const auto out_c = branches[0].weight.shape()[0];
    out.push_back({name + ".up", "bilinear x2 @" + std::to_string(2 * in_res),
                   opcount::upsample_bilinear(out_c * 4 * in_res * in_res)});
  }
};

// All-pairs route fusion. Contribution i->j is: identity-resolution 1x1
// projection (i==j), a chain of stride-2 3x3 convs walking the width ladder
// (i<j), or a 1x1 projection followed by bilinear upsampling (i>j). Outputs
// are plain sums, no activation, so a zero-cross/identity-self configuration
// passes routes through unchanged.
template <typename T>
struct ExchangeLayer {
  std::array<std::array<std::vector<Conv2dLayer<T>>, 4>, 4> proj;  // proj[i][j]: route i -> route j
  std::array<std::int64_t, 4> width{};
  std::array<std::int64_t, 4> res{};

  ExchangeLayer() = default;
  ExchangeLayer(const std::array<std::int64_t, 4>& widths, const std::array<std::int64_t, 4>& resolutions,
                std::uint64_t seed, const std::string& name)
      : width(widths), res(resolutions) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const std::string pname = name + ".p" + std::to_string(i) + std::to_string(j);
        if (i == j) {
          proj[i][j].emplace_back(width[i], width[i], 1, 1, 0, 1, seed, pname);
        } else if (i < j) {
          for (int t = i; t < j; ++t) {
            proj[i][j].emplace_back(width[t], width[t + 1], 3, 2, 1, 1, seed,
                                    pname + ".s" + std::to_string(t - i));
          }
        } else {
          proj[i][j].emplace_back(width[i], width[j], 1, 1, 0, 1, seed, pname);
        }
      }
    }
  }

  std::array<Tensor<T>, 4> forward(const std::array<Tensor<T>, 4>& routes) const {
    for (int i = 0; i < 4; ++i) {
      const Shape expected = {1, width[i], res[i], res[i]};
      if (routes[i].shape() != expected) {
        throw DimensionError("exchange: route " + std::to_string(i) + " expected " + shape_str(expected) +
                             ", got " + shape_str(routes[i].shape()));
      }
    }
    std::array<Tensor<T>, 4> out;
    for (int j = 0; j < 4; ++j) {
      Tensor<T> acc;
      for (int i = 0; i < 4; ++i) {
        auto c = contribution(i, j, routes[i]);
        acc = acc.defined() ? add(acc, c) : c;
      }
      out[j] = acc;
    }
    return out;
  }

  Tensor<T> contribution(int i, int j, const Tensor<T>& x) const {
    if (i == j) return proj[i][j][0].forward(x);
    if (i < j) {
      auto y = x;
      for (const auto& conv : proj[i][j]) y = conv.forward(y);
      return y;
    }
    return upsample_bilinear(proj[i][j][0].forward(x), res[j] / res[i]);
  }

  void collect(const std::string& name, ParamList<T>& out) const {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const std::string pname = name + ".p" + std::to_string(i) + std::to_string(j);
        if (proj[i][j].size() == 1) {
          proj[i][j][0].collect(pname, out);
        } else {
          for (std::size_t t = 0; t < proj[i][j].size(); ++t) {
            proj[i][j][t].collect(pname + ".s" + std::to_string(t), out);
          }
        }
      }
    }
  }

  void describe(const std::string& name, ModelDesc& out) const {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const std::string pname = name + ".p" + std::to_string(i) + std::to_string(j);
        if (i == j) {
          out.push_back(proj[i][j][0].describe(pname, res[i], res[i]));
        } else if (i < j) {
          std::int64_t r = res[i];
          for (std::size_t t = 0; t < proj[i][j].size(); ++t) {
            out.push_back(proj[i][j][t].describe(pname + ".s" + std::to_string(t), r, r));
            r = proj[i][j][t].out_dim(r);
          }
        } else {
          out.push_back(proj[i][j][0].describe(pname, res[i], res[i]));
          out.push_back({pname + ".up", "bilinear to @" + std::to_string(res[j]),
                         opcount::upsample_bilinear(width[j] * res[j] * res[j])});
        }
      }
    }
  }
};

template <typename T>
class Decoder {
 public:
  Decoder(const DecoderConfig& cfg, std::int64_t k, std::int64_t f, std::uint64_t seed)
      : cfg_(cfg), k_(k), f_(f), seed_(seed) {
    cfg_.validate();
    if (k < 1 || f < 1) throw ConfigError("decoder: k and f must be >= 1");
    for (int i = 0; i < 4; ++i) {
      w_[i] = cfg_.scaled(cfg_.widths[i]);
      const std::int64_t r = cfg_.grid >> i;
      res_[i] = r < 1 ? 1 : r;
    }
    c0_ = cfg_.scaled(cfg_.c0);
    const std::int64_t half = cfg_.grid / 2;

    stem_ = FcLayer<T>(k_ * 2 * f_, c0_ * half * half, seed, "decoder.stem.fc");
    exp1_ = ExpansionLayer<T>(c0_, w_[0], cfg_.dilations, seed, "decoder.block0.exp");
    seeds_[0] = Conv2dLayer<T>(w_[0], w_[1], 3, 2, 1, 1, seed, "decoder.block0.seed1");
    seeds_[1] = Conv2dLayer<T>(w_[1], w_[2], 3, 2, 1, 1, seed, "decoder.block0.seed2");
    seeds_[2] = Conv2dLayer<T>(w_[2], w_[3], 3, 2, 1, 1, seed, "decoder.block0.seed3");
    x1_ = ExchangeLayer<T>(w_, res_, seed, "decoder.block1.x");
    exp2_ = ExpansionLayer<T>(w_[1], w_[0], cfg_.dilations, seed, "decoder.block2.exp");
    x2_ = ExchangeLayer<T>(w_, res_, seed, "decoder.block3.x");
    if (cfg_.output_resolution == 4 * cfg_.grid) {
      upscales_.emplace_back(w_[0], w_[0], cfg_.dilations, seed, "decoder.upscale0");
      upscales_.emplace_back(w_[0], w_[0], cfg_.dilations, seed, "decoder.upscale1");
    }
    init_head(seed);
  }

  const DecoderConfig& config() const { return cfg_; }
  HeadMode head_mode() const { return cfg_.head; }

  Tensor<T> forward(const Tensor<T>& descriptors) const {
    const Shape expected = {k_, 2 * f_};
    if (descriptors.shape() != expected) {
      throw DimensionError("decoder: expected descriptors " + shape_str(expected) + ", got " +
                           shape_str(descriptors.shape()));
    }
    const std::int64_t half = cfg_.grid / 2;
    auto x = relu(reshape(stem_.forward(reshape(descriptors, {1, k_ * 2 * f_})), {1, c0_, half, half}));

    std::array<Tensor<T>, 4> routes;
    routes[0] = relu(exp1_.forward(x));
    for (int i = 0; i < 3; ++i) routes[i + 1] = relu(seeds_[i].forward(routes[i]));

    auto ex1 = x1_.forward(routes);
    for (auto& r : ex1) r = relu(r);

    ex1[0] = relu(add(exp2_.forward(ex1[1]), ex1[0]));

    auto ex2 = x2_.forward(ex1);
    auto y = relu(ex2[0]);
    for (const auto& up : upscales_) y = relu(up.forward(y));

    auto out = head2_.forward(relu(head1_.forward(y)));
    if (cfg_.head == HeadMode::kClassification) out = softmax_channel(out);
    return out;  // (1, head_channels, out_res, out_res)
  }

  // Reinitializes only the two head convs; backbone tensors are untouched.
  void swap_head(HeadMode mode, std::uint64_t seed) {
    cfg_.head = mode;
    init_head(seed);
  }

  ParamList<T> named_params(const std::string& prefix = "decoder") const {
    ParamList<T> out;
    stem_.collect(prefix + ".stem.fc", out);
    exp1_.collect(prefix + ".block0.exp", out);
    for (int i = 0; i < 3; ++i) seeds_[i].collect(prefix + ".block0.seed" + std::to_string(i + 1), out);
    x1_.collect(prefix + ".block1.x", out);
    exp2_.collect(prefix + ".block2.exp", out);
    x2_.collect(prefix + ".block3.x", out);
    for (std::size_t i = 0; i < upscales_.size(); ++i) {
      upscales_[i].collect(prefix + ".upscale" + std::to_string(i), out);
    }
    head1_.collect(prefix + ".head.conv1", out);
    head2_.collect(prefix + ".head.conv2", out);
    return out;
  }

  ModelDesc describe(const std::string& prefix = "decoder") const {
    ModelDesc out;
    out.push_back(stem_.describe(prefix + ".stem.fc"));
    const std::int64_t half = cfg_.grid / 2;
    exp1_.describe(prefix + ".block0.exp", half, out);
    std::int64_t r = cfg_.grid;
    for (int i = 0; i < 3; ++i) {
      out.push_back(seeds_[i].describe(prefix + ".block0.seed" + std::to_string(i + 1), r, r));
      r = seeds_[i].out_dim(r);
    }
    x1_.describe(prefix + ".block1.x", out);
    exp2_.describe(prefix + ".block2.exp", res_[1], out);
    x2_.describe(prefix + ".block3.x", out);
    std::int64_t hr = cfg_.grid;
    for (std::size_t i = 0; i < upscales_.size(); ++i) {
      upscales_[i].describe(prefix + ".upscale" + std::to_string(i), hr, out);
      hr *= 2;
    }
    out.push_back(head1_.describe(prefix + ".head.conv1", hr, hr));
    out.push_back(head2_.describe(prefix + ".head.conv2", hr, hr));
    return out;
  }

 private:
  void init_head(std::uint64_t seed) {
    head1_ = Conv2dLayer<T>(w_[0], w_[0], 3, 1, 1, 1, seed, "decoder.head.conv1");
    head2_ = Conv2dLayer<T>(w_[0], cfg_.head_channels(), 3, 1, 1, 1, seed, "decoder.head.conv2");
  }

  DecoderConfig cfg_;
  std::int64_t k_ = 0, f_ = 0, c0_ = 0;
  std::uint64_t seed_ = 0;
  std::array<std::int64_t, 4> w_{}, res_{};
  FcLayer<T> stem_;
  ExpansionLayer<T> exp1_, exp2_;
  std::array<Conv2dLayer<T>, 3> seeds_;
  ExchangeLayer<T> x1_, x2_;
  std::vector<ExpansionLayer<T>> upscales_;
  Conv2dLayer<T> head1_, head2_;
};

}  // namespace spmkd
