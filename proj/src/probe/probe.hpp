#pragma once

// Linear posture probe: multinomial logistic regression over flattened
// keypoint descriptors from a frozen encoder+fuser. The probe only ever sees
// detached features, so fitting it cannot perturb model weights; it measures
// how much posture information the self-supervised representation carries.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "model/model.hpp"

namespace spmkd {

inline constexpr int kProbeClasses = 3;  // one per posture

// Detached features (one k*2f descriptor row per sample) with posture labels.
struct ProbeSet {
  std::vector<std::vector<float>> features;
  std::vector<int> labels;  // 0..2, Posture enum values

  std::size_t size() const { return features.size(); }
};

struct ProbeModel {
  std::int64_t dim = 0;                     // k*2f
  std::vector<double> weight;               // kProbeClasses x dim, row-major
  std::array<double, kProbeClasses> bias{};
  std::vector<double> feat_mean;            // standardization fitted on the training split
  std::vector<double> feat_std;
  std::array<std::string, kProbeClasses> classes;

  int predict(const std::vector<float>& descriptor) const;
};

struct ProbeEval {
  double accuracy = 0.0;
  // confusion[true][predicted]; row sums equal per-class sample counts
  std::array<std::array<std::int64_t, kProbeClasses>, kProbeClasses> confusion{};
  std::int64_t count = 0;
};

// Frozen forward pass: unit-normalizes the map, downsamples it to the model's
// input size, and returns the flattened (k*2f) descriptor vector.
std::vector<float> extract_descriptor(const SpmkdModel<float>& model, const PressureMap& map);

// extract_descriptor over the given sample indices; unlabeled (degraded)
// samples are skipped.
ProbeSet extract_features(const SpmkdModel<float>& model, const Dataset& ds,
                          const std::vector<std::size_t>& indices);

// Full-batch gradient descent on the multinomial logistic loss, double
// precision, zero init, fixed iteration budget. Features are standardized
// per dimension; the transform is stored in the returned model.
ProbeModel fit_probe(const ProbeSet& data, std::int64_t iters, double lr);

ProbeEval evaluate_probe(const ProbeModel& probe, const ProbeSet& data);

// Appends one "tag,count,accuracy,c00..c22" row, writing the header first if
// the file does not exist yet.
void append_probe_results(const std::string& path, const std::string& tag, const ProbeEval& eval);

}  // namespace spmkd
