#pragma once

// Central finite-difference audit of analytic gradients. Meant to run on
// 64-bit tensors; 32-bit rounding drowns the difference quotient.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/tensor.hpp"

namespace spmkd {

template <typename T>
struct GradCheckEntry {
  std::string name;
  T max_rel_err = T(0);
  std::int64_t worst_index = -1;
  bool nonzero = false;  // analytic gradient has at least one nonzero element
  bool passed = false;
};

template <typename T>
struct GradCheckReport {
  std::vector<GradCheckEntry<T>> entries;
  T max_rel_err = T(0);
  bool all_passed = true;
  bool all_nonzero = true;
};

// loss_fn rebuilds the graph from current parameter values and returns a
// scalar tensor. Every element of every named parameter is perturbed twice.
template <typename T, typename LossFn>
GradCheckReport<T> grad_check(LossFn&& loss_fn, const std::vector<std::pair<std::string, Tensor<T>>>& params,
                              T step, T tolerance) {
  for (const auto& [name, p] : params) p.zero_grad();
  Tensor<T> loss = loss_fn();
  if (!loss.all_finite()) throw NumericError("grad_check: loss is not finite");
  loss.backward();

  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    analytic.push_back(p.has_grad() ? p.grad() : std::vector<T>(p.values().size(), T(0)));
  }

  // Central difference truncation error is O(step^2); treat anything at that
  // scale as numerically zero rather than forcing a relative comparison.
  const T atol = step * step;

  GradCheckReport<T> report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, p] = params[pi];
    GradCheckEntry<T> entry;
    entry.name = name;
    auto& vals = p.values_mutable();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const T saved = vals[i];
      vals[i] = saved + step;
      const T lp = loss_fn().item();
      vals[i] = saved - step;
      const T lm = loss_fn().item();
      vals[i] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm)) throw NumericError("grad_check: perturbed loss is not finite");
      const T fd = (lp - lm) / (T(2) * step);
      const T a = analytic[pi][i];
      if (a != T(0)) entry.nonzero = true;
      const T denom = std::max(std::abs(a), std::abs(fd));
      const T rel = denom <= atol ? T(0) : std::abs(a - fd) / denom;
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = static_cast<std::int64_t>(i);
      }
    }
    entry.passed = entry.max_rel_err < tolerance;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.all_passed = report.all_passed && entry.passed;
    report.all_nonzero = report.all_nonzero && entry.nonzero;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace spmkd
