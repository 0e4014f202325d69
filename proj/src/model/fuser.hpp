#pragma once

// Differentiable keypoint pooling: heatmap logits become per-keypoint pixel
// weights, which pool the positional grid and the feature grid into compact
// descriptors. Every step is a smooth op, so reconstruction gradients flow
// back into the encoder uninterrupted.

#include <cstdint>
#include <string>

#include "core/opcount.hpp"
#include "core/ops.hpp"
#include "core/tensor.hpp"
#include "model/layers.hpp"

namespace spmkd {

enum class WeightMode {
  kSigmoidNorm,  // sigmoid then per-keypoint unit-sum normalization
  kSoftmax,      // plain softmax over pixels
};

struct FuserConfig {
  WeightMode mode = WeightMode::kSigmoidNorm;
};

template <typename T>
struct KeypointSet {
  Tensor<T> positions;    // (k, 3) pooled homogeneous coordinates
  Tensor<T> features;     // (k, f) pooled features
  Tensor<T> descriptors;  // (k, 2f) concat of projected positions and features
};

// (k, HW) logits -> (k, HW) weights; each row sums to 1 and stays positive.
template <typename T>
Tensor<T> normalize_heatmap(const Tensor<T>& logits2d, WeightMode mode) {
  if (logits2d.shape().size() != 2) {
    throw DimensionError("normalize_heatmap expects (k, pixels) logits, got " + shape_str(logits2d.shape()));
  }
  if (mode == WeightMode::kSoftmax) return softmax(logits2d, 1);
  return normalize_rows(sigmoid(logits2d));
}

template <typename T>
class Fuser {
 public:
  Fuser(const FuserConfig& cfg, std::int64_t f, std::uint64_t seed)
      : cfg_(cfg), f_(f), proj_(3, f, seed, "fuser.proj") {
    if (f < 1) throw ConfigError("fuser: f must be >= 1");
  }

  const FuserConfig& config() const { return cfg_; }

  // heatmap (1,k,g,g), coords (3,g,g), features (1,f,g,g) -> KeypointSet.
  KeypointSet<T> fuse(const Tensor<T>& heatmap, const Tensor<T>& coords, const Tensor<T>& features) const {
    if (heatmap.shape().size() != 4 || coords.shape().size() != 3 || features.shape().size() != 4) {
      throw DimensionError("fuser: expected (1,k,g,g), (3,g,g), (1,f,g,g)");
    }
    const std::int64_t k = heatmap.shape()[1];
    const std::int64_t gh = heatmap.shape()[2], gw = heatmap.shape()[3];
    if (coords.shape()[1] != gh || coords.shape()[2] != gw || features.shape()[2] != gh ||
        features.shape()[3] != gw) {
      throw DimensionError("fuser: spatial dims disagree across heatmap/coords/features");
    }
    if (features.shape()[1] != f_) {
      throw DimensionError("fuser: feature grid has " + std::to_string(features.shape()[1]) +
                           " channels, expected " + std::to_string(f_));
    }
    const std::int64_t hw = gh * gw;

    auto weights = normalize_heatmap(reshape(heatmap, {k, hw}), cfg_.mode);
    auto pos = matmul(weights, transpose2d(reshape(coords, {3, hw})));        // (k, 3)
    auto feat = matmul(weights, transpose2d(reshape(features, {f_, hw})));    // (k, f)
    auto desc = concat(proj_.forward(pos), feat, 1);                          // (k, 2f)
    return {pos, feat, desc};
  }

  ParamList<T> named_params(const std::string& prefix = "fuser") const {
    ParamList<T> out;
    proj_.collect(prefix + ".proj", out);
    return out;
  }

  ModelDesc describe(std::int64_t k, std::int64_t hw, const std::string& prefix = "fuser") const {
    OpCount pool;
    pool.flops = 2 * k * hw * (3 + f_)  // two pooling matmuls
                 + (cfg_.mode == WeightMode::kSoftmax ? 5 * k * hw : 4 * k * hw + 2 * k * hw);
    auto proj = proj_.describe(prefix + ".proj", k);
    return {
        {prefix + ".pool", "weights+pool k=" + std::to_string(k) + " hw=" + std::to_string(hw), pool},
        proj,
    };
  }

 private:
  FuserConfig cfg_;
  std::int64_t f_;
  FcLayer<T> proj_;
};

}  // namespace spmkd
