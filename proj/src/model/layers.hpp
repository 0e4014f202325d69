#pragma once

// Small trainable layer structs shared by the encoder and decoder, plus the
// deterministic name-seeded initializer. Seeding by parameter name makes
// initialization independent of construction order.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/opcount.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace spmkd {

template <typename T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>>>;

// He-style fan-in scaled normal init, drawn from an Rng derived from
// (base_seed, parameter name).
template <typename T>
Tensor<T> init_weight(Shape shape, std::int64_t fan_in, std::uint64_t base_seed, const std::string& name) {
  Rng rng(mix_seed(base_seed, fnv1a64(name.data(), name.size())));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<T> vals(static_cast<std::size_t>(numel(shape)));
  for (auto& v : vals) v = static_cast<T>(rng.normal() * stddev);
  return Tensor<T>::from(std::move(shape), std::move(vals), true);
}

template <typename T>
struct Conv2dLayer {
  Tensor<T> weight, bias;
  std::int64_t stride = 1, padding = 0, dilation = 1;

  Conv2dLayer() = default;
  // Bias starts slightly positive so freshly initialized channels are not
  // silenced by a following relu.
  Conv2dLayer(std::int64_t in_c, std::int64_t out_c, std::int64_t k, std::int64_t stride_, std::int64_t padding_,
              std::int64_t dilation_, std::uint64_t seed, const std::string& name)
      : weight(init_weight<T>({out_c, in_c, k, k}, in_c * k * k, seed, name + ".weight")),
        bias(Tensor<T>::filled({out_c}, T(0.01), true)),
        stride(stride_),
        padding(padding_),
        dilation(dilation_) {}

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, weight, bias, stride, padding, dilation); }

  void collect(const std::string& name, ParamList<T>& out) const {
    out.emplace_back(name + ".weight", weight);
    out.emplace_back(name + ".bias", bias);
  }

  std::int64_t out_dim(std::int64_t in) const {
    return detail::conv_out_dim(in, padding, weight.shape()[2], dilation, stride);
  }

  LayerDesc describe(const std::string& name, std::int64_t in_h, std::int64_t in_w) const {
    const auto& w = weight.shape();
    const std::int64_t oh = out_dim(in_h), ow = out_dim(in_w);
    return {name,
            "conv " + std::to_string(w[1]) + "->" + std::to_string(w[0]) + " k" + std::to_string(w[2]) + " s" +
                std::to_string(stride) + " d" + std::to_string(dilation) + " @" + std::to_string(oh) + "x" +
                std::to_string(ow),
            opcount::conv2d(w[1], w[0], w[2], w[3], oh, ow)};
  }
};

template <typename T>
struct FcLayer {
  Tensor<T> weight, bias;

  FcLayer() = default;
  FcLayer(std::int64_t in_f, std::int64_t out_f, std::uint64_t seed, const std::string& name)
      : weight(init_weight<T>({in_f, out_f}, in_f, seed, name + ".weight")),
        bias(Tensor<T>::zeros({out_f}, true)) {}

  Tensor<T> forward(const Tensor<T>& x) const { return fully_connected(x, weight, bias); }

  void collect(const std::string& name, ParamList<T>& out) const {
    out.emplace_back(name + ".weight", weight);
    out.emplace_back(name + ".bias", bias);
  }

  LayerDesc describe(const std::string& name, std::int64_t rows = 1) const {
    const auto& w = weight.shape();
    return {name, "fc " + std::to_string(w[0]) + "->" + std::to_string(w[1]),
            opcount::fully_connected(w[0], w[1], rows)};
  }
};

}  // namespace spmkd
