#pragma once

// First-order optimizers over named parameter lists. All state is indexed by
// parameter position, so the update order (and therefore the arithmetic) is
// identical run to run. A parameter that received no gradient this step is
// treated as having gradient zero.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/tensor.hpp"
#include "model/layers.hpp"

namespace spmkd {

enum class OptimizerKind {
  kSgd,
  kMomentum,
  kAdam,
};

inline const char* optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adam";
  }
  return "?";
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (lr <= 0) throw ConfigError("optimizer: lr must be positive");
    if (momentum < 0 || momentum >= 1) throw ConfigError("optimizer: momentum must be in [0,1)");
    if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1) {
      throw ConfigError("optimizer: beta1, beta2 must be in (0,1)");
    }
    if (eps <= 0) throw ConfigError("optimizer: eps must be positive");
  }
};

template <typename T>
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, ParamList<T> params) : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    if (cfg_.kind != OptimizerKind::kSgd) {
      slot1_.resize(params_.size());
      for (std::size_t i = 0; i < params_.size(); ++i) {
        slot1_[i].assign(params_[i].second.values().size(), T(0));
      }
    }
    if (cfg_.kind == OptimizerKind::kAdam) {
      slot2_ = slot1_;
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  // Applies one update from the gradients currently stored on the parameters.
  void step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].second;
      auto& v = p.values_mutable();
      const bool has_g = p.has_grad();
      const auto& g = p.grad();
      switch (cfg_.kind) {
        case OptimizerKind::kSgd: {
          if (!has_g) break;
          const T lr = static_cast<T>(cfg_.lr);
          for (std::size_t j = 0; j < v.size(); ++j) v[j] -= lr * g[j];
          break;
        }
        case OptimizerKind::kMomentum: {
          const T lr = static_cast<T>(cfg_.lr);
          const T mu = static_cast<T>(cfg_.momentum);
          auto& vel = slot1_[i];
          for (std::size_t j = 0; j < v.size(); ++j) {
            vel[j] = mu * vel[j] + (has_g ? g[j] : T(0));
            v[j] -= lr * vel[j];
          }
          break;
        }
        case OptimizerKind::kAdam: {
          const T b1 = static_cast<T>(cfg_.beta1);
          const T b2 = static_cast<T>(cfg_.beta2);
          const T corr1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, t_));
          const T corr2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, t_));
          const T lr = static_cast<T>(cfg_.lr);
          const T eps = static_cast<T>(cfg_.eps);
          auto& m = slot1_[i];
          auto& s = slot2_[i];
          for (std::size_t j = 0; j < v.size(); ++j) {
            const T gj = has_g ? g[j] : T(0);
            m[j] = b1 * m[j] + (T(1) - b1) * gj;
            s[j] = b2 * s[j] + (T(1) - b2) * gj * gj;
            v[j] -= lr * (m[j] / corr1) / (std::sqrt(s[j] / corr2) + eps);
          }
          break;
        }
      }
    }
  }

  std::int64_t steps_taken() const { return t_; }
  const ParamList<T>& params() const { return params_; }

 private:
  OptimizerConfig cfg_;
  ParamList<T> params_;
  std::vector<std::vector<T>> slot1_;  // velocity (momentum) or first moment (adam)
  std::vector<std::vector<T>> slot2_;  // second moment (adam)
  std::int64_t t_ = 0;
};

}  // namespace spmkd
