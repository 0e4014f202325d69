#pragma once

// Reconstruction losses and evaluation metrics. SSIM is built from existing
// differentiable ops (windowed means via const-kernel convolution), so its
// gradient needs no bespoke backward code. The combined loss is
// alpha * L2 + beta * (1 - SSIM); the SSIM value itself is the standard
// windowed ratio, averaged over window positions.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "core/ops.hpp"
#include "core/tensor.hpp"

namespace spmkd {

enum class SsimWindow {
  kUniform,
  kGaussian,  // sigma 1.5, normalized
  kGlobal,    // one window spanning the whole image
};

struct LossConfig {
  double alpha = 1.0;
  double beta = 1.0;
  // Stabilizers for unit dynamic range: (0.01*R)^2 and (0.03*R)^2 with R=1.
  double c1 = 1e-4;
  double c2 = 9e-4;
  SsimWindow window = SsimWindow::kUniform;
  std::int64_t window_size = 7;

  void validate() const {
    if (alpha < 0 || beta < 0 || alpha + beta <= 0) {
      throw ConfigError("loss: alpha, beta must be >= 0 with alpha + beta > 0");
    }
    if (c1 <= 0 || c2 <= 0) throw ConfigError("loss: c1 and c2 must be positive");
    if (window != SsimWindow::kGlobal && window_size < 1) {
      throw ConfigError("loss: ssim window size must be >= 1");
    }
  }
};

namespace detail {

// Accepts (H,W), (1,H,W) or (1,1,H,W) single-channel images.
template <typename T>
Tensor<T> as_image(const Tensor<T>& t, const char* what) {
  const auto& s = t.shape();
  if (s.size() == 2) return reshape(t, {1, 1, s[0], s[1]});
  if (s.size() == 3 && s[0] == 1) return reshape(t, {1, 1, s[1], s[2]});
  if (s.size() == 4 && s[0] == 1 && s[1] == 1) return t;
  throw DimensionError(std::string(what) + ": expected a single-channel image, got " + shape_str(s));
}

template <typename T>
Tensor<T> ssim_kernel(SsimWindow kind, std::int64_t wh, std::int64_t ww) {
  std::vector<T> k(static_cast<std::size_t>(wh * ww));
  if (kind == SsimWindow::kGaussian) {
    const double sigma = 1.5;
    const double cy = (wh - 1) / 2.0, cx = (ww - 1) / 2.0;
    double sum = 0;
    for (std::int64_t y = 0; y < wh; ++y) {
      for (std::int64_t x = 0; x < ww; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const double v = std::exp(-d2 / (2 * sigma * sigma));
        k[y * ww + x] = static_cast<T>(v);
        sum += v;
      }
    }
    for (auto& v : k) v = static_cast<T>(v / sum);
  } else {
    const T uniform = T(1) / static_cast<T>(wh * ww);
    for (auto& v : k) v = uniform;
  }
  return Tensor<T>::from({1, 1, wh, ww}, std::move(k));
}

}  // namespace detail

// Mean squared per-pixel difference.
template <typename T>
Tensor<T> l2_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check_same_shape(pred, target, "l2_loss");
  auto d = sub(pred, target);
  return mean_all(mul(d, d));
}

template <typename T>
Tensor<T> ssim(const Tensor<T>& a_in, const Tensor<T>& b_in, const LossConfig& cfg) {
  cfg.validate();
  auto a = detail::as_image(a_in, "ssim");
  auto b = detail::as_image(b_in, "ssim");
  check_same_shape(a, b, "ssim");
  const std::int64_t h = a.shape()[2], w = a.shape()[3];
  const std::int64_t wh = cfg.window == SsimWindow::kGlobal ? h : cfg.window_size;
  const std::int64_t ww = cfg.window == SsimWindow::kGlobal ? w : cfg.window_size;
  if (wh > h || ww > w) {
    throw DimensionError("ssim: window " + std::to_string(wh) + "x" + std::to_string(ww) +
                         " larger than image " + std::to_string(h) + "x" + std::to_string(w));
  }
  auto kernel = detail::ssim_kernel<T>(cfg.window, wh, ww);
  auto mean_of = [&](const Tensor<T>& t) { return conv2d(t, kernel, Tensor<T>(), 1, 0, 1); };

  auto mu_a = mean_of(a);
  auto mu_b = mean_of(b);
  auto mu_aa = mul(mu_a, mu_a);
  auto mu_bb = mul(mu_b, mu_b);
  auto mu_ab = mul(mu_a, mu_b);
  auto var_a = sub(mean_of(mul(a, a)), mu_aa);
  auto var_b = sub(mean_of(mul(b, b)), mu_bb);
  auto cov = sub(mean_of(mul(a, b)), mu_ab);

  const T c1 = static_cast<T>(cfg.c1), c2 = static_cast<T>(cfg.c2);
  auto num = mul(add_scalar(mul_scalar(mu_ab, T(2)), c1), add_scalar(mul_scalar(cov, T(2)), c2));
  auto den = mul(add_scalar(add(mu_aa, mu_bb), c1), add_scalar(add(var_a, var_b), c2));
  return mean_all(div(num, den));
}

// Eq. alpha * L2 + beta * (1 - SSIM). Terms with zero weight are skipped
// entirely, so (1,0) reproduces l2_loss bit for bit.
template <typename T>
Tensor<T> combined_loss(const Tensor<T>& pred, const Tensor<T>& target, const LossConfig& cfg) {
  cfg.validate();
  Tensor<T> total;
  if (cfg.alpha != 0) {
    total = mul_scalar(l2_loss(pred, target), static_cast<T>(cfg.alpha));
  }
  if (cfg.beta != 0) {
    auto s = mul_scalar(scalar_sub(T(1), ssim(pred, target, cfg)), static_cast<T>(cfg.beta));
    total = total.defined() ? add(total, s) : s;
  }
  return total;
}

// pred: channel-softmaxed (1,2,H,W) or (2,H,W); target: binary (H,W) mask
// (channel 1 = pressure present). Mean negative log-likelihood per pixel.
template <typename T>
Tensor<T> pixel_cross_entropy(const Tensor<T>& pred, const Tensor<T>& target) {
  const auto& s = pred.shape();
  std::int64_t h = 0, w = 0;
  if (s.size() == 4 && s[0] == 1 && s[1] == 2) {
    h = s[2];
    w = s[3];
  } else if (s.size() == 3 && s[0] == 2) {
    h = s[1];
    w = s[2];
  } else {
    throw DimensionError("pixel_cross_entropy: expected (1,2,H,W) or (2,H,W) prediction, got " +
                         shape_str(s));
  }
  const auto& ts = target.shape();
  if (!(ts.size() == 2 && ts[0] == h && ts[1] == w)) {
    throw DimensionError("pixel_cross_entropy: target must be (H,W) matching the prediction");
  }
  const std::int64_t hw = h * w;
  for (std::int64_t p = 0; p < hw; ++p) {
    const T total = pred.values()[p] + pred.values()[hw + p];
    if (std::abs(static_cast<double>(total) - 1.0) > 1e-4) {
      throw StateError("pixel_cross_entropy: prediction channels do not sum to 1 (got " +
                       std::to_string(static_cast<double>(total)) + ")");
    }
  }
  for (T v : target.values()) {
    if (v != T(0) && v != T(1)) throw StateError("pixel_cross_entropy: target mask must be binary");
  }

  // Denormal floor keeps log() finite if a softmax channel underflows.
  const T eps = std::numeric_limits<T>::min();
  auto p2 = reshape(pred, {2, hw});
  auto log_p0 = log(add_scalar(narrow(p2, 0, 0, 1), eps));
  auto log_p1 = log(add_scalar(narrow(p2, 0, 1, 1), eps));
  auto m = reshape(target.detach(), {1, hw});
  auto ll = add(mul(m, log_p1), mul(scalar_sub(T(1), m), log_p0));
  return mul_scalar(mean_all(ll), T(-1));
}

// ---------------------------------------------------------------------------
// plain (non-differentiable) metrics
// ---------------------------------------------------------------------------

template <typename T>
double l1_metric(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "l1_metric");
  double acc = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    acc += std::abs(static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i]));
  }
  return acc / static_cast<double>(a.values().size());
}

template <typename T>
double l2_metric(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "l2_metric");
  double acc = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.values().size());
}

// Channel-argmax mask from a (1,2,H,W) or (2,H,W) prediction.
template <typename T>
std::vector<std::uint8_t> argmax_mask(const Tensor<T>& pred) {
  const auto& s = pred.shape();
  std::int64_t hw = 0;
  if (s.size() == 4 && s[0] == 1 && s[1] == 2) {
    hw = s[2] * s[3];
  } else if (s.size() == 3 && s[0] == 2) {
    hw = s[1] * s[2];
  } else {
    throw DimensionError("argmax_mask: expected (1,2,H,W) or (2,H,W), got " + shape_str(s));
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(hw));
  for (std::int64_t p = 0; p < hw; ++p) mask[p] = pred.values()[hw + p] > pred.values()[p] ? 1 : 0;
  return mask;
}

template <typename T>
std::vector<std::uint8_t> threshold_mask(const Tensor<T>& img, T threshold) {
  std::vector<std::uint8_t> mask(img.values().size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = img.values()[i] > threshold ? 1 : 0;
  return mask;
}

// F1 on the positive class: 2TP / (2TP + FP + FN); 0 when that denominator
// is empty.
inline double f_score(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& target) {
  if (pred.size() != target.size()) throw DimensionError("f_score: mask sizes differ");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && target[i]) {
      ++tp;
    } else if (pred[i] && !target[i]) {
      ++fp;
    } else if (!pred[i] && target[i]) {
      ++fn;
    }
  }
  const std::int64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace spmkd
