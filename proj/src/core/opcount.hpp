#pragma once

// Analytic FLOP and parameter counting. Convention: one multiply-accumulate
// counts as 2 FLOPs; bias adds and activations count 1 FLOP per element.

#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace spmkd {

struct OpCount {
  std::int64_t flops = 0;
  std::int64_t params = 0;

  OpCount& operator+=(const OpCount& o) {
    flops += o.flops;
    params += o.params;
    return *this;
  }
  friend OpCount operator+(OpCount a, const OpCount& b) { return a += b; }
  friend bool operator==(const OpCount&, const OpCount&) = default;
};

struct LayerDesc {
  std::string name;    // dotted path, e.g. "decoder.block1.exchange.d01"
  std::string detail;  // human-readable shape summary
  OpCount count;
};

using ModelDesc = std::vector<LayerDesc>;

inline OpCount count_ops(const ModelDesc& desc) {
  OpCount total;
  for (const auto& layer : desc) total += layer.count;
  return total;
}

// Sums layers whose dotted name starts with the given prefix.
inline OpCount count_ops_prefix(const ModelDesc& desc, const std::string& prefix) {
  OpCount total;
  for (const auto& layer : desc) {
    if (layer.name.rfind(prefix, 0) == 0) total += layer.count;
  }
  return total;
}

namespace opcount {

inline void require_positive(std::int64_t v, const char* what) {
  if (v < 1) throw ConfigError(std::string("count_ops: ") + what + " must be positive");
}

inline OpCount conv2d(std::int64_t in_c, std::int64_t out_c, std::int64_t kh, std::int64_t kw,
                      std::int64_t out_h, std::int64_t out_w, bool bias = true) {
  require_positive(in_c, "in_c");
  require_positive(out_c, "out_c");
  require_positive(out_h * out_w, "output size");
  OpCount c;
  c.params = out_c * (in_c * kh * kw + (bias ? 1 : 0));
  c.flops = 2 * out_c * in_c * kh * kw * out_h * out_w;
  if (bias) c.flops += out_c * out_h * out_w;
  return c;
}

inline OpCount fully_connected(std::int64_t in_f, std::int64_t out_f, std::int64_t rows = 1, bool bias = true) {
  require_positive(in_f, "in_f");
  require_positive(out_f, "out_f");
  OpCount c;
  c.params = in_f * out_f + (bias ? out_f : 0);
  c.flops = 2 * in_f * out_f * rows + (bias ? out_f * rows : 0);
  return c;
}

inline OpCount activation(std::int64_t elems, std::int64_t flops_per_elem = 1) {
  OpCount c;
  c.flops = elems * flops_per_elem;
  return c;
}

inline OpCount elementwise_add(std::int64_t elems) { return activation(elems, 1); }

// 4 taps -> 3 lerps, 2 FLOPs each, plus precomputed tap tables (not counted).
inline OpCount upsample_bilinear(std::int64_t out_elems) { return activation(out_elems, 6); }

// max + exp + sum + div per element, flat approximation.
inline OpCount softmax(std::int64_t elems) { return activation(elems, 5); }

inline OpCount sigmoid(std::int64_t elems) { return activation(elems, 4); }

}  // namespace opcount

}  // namespace spmkd
