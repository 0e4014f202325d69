#include "probe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "data/pressure.hpp"
#include "train/metrics.hpp"

namespace spmkd {

namespace {

// Standardized copy of one descriptor.
std::vector<double> standardize(const ProbeModel& m, const std::vector<float>& x) {
  std::vector<double> out(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) {
    out[d] = (static_cast<double>(x[d]) - m.feat_mean[d]) / m.feat_std[d];
  }
  return out;
}

std::array<double, kProbeClasses> class_probs(const ProbeModel& m, const std::vector<double>& x) {
  std::array<double, kProbeClasses> z{};
  for (int c = 0; c < kProbeClasses; ++c) {
    double acc = m.bias[c];
    const double* w = m.weight.data() + c * m.dim;
    for (std::int64_t d = 0; d < m.dim; ++d) acc += w[d] * x[d];
    z[c] = acc;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0;
  for (auto& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return z;
}

void check_set(const ProbeSet& data, const char* op) {
  if (data.features.size() != data.labels.size()) {
    throw DimensionError(std::string(op) + ": feature/label count mismatch");
  }
  if (data.features.empty()) throw StateError(std::string(op) + ": empty probe set");
  const std::size_t dim = data.features.front().size();
  for (const auto& f : data.features) {
    if (f.size() != dim) throw DimensionError(std::string(op) + ": ragged descriptor rows");
  }
  for (int y : data.labels) {
    if (y < 0 || y >= kProbeClasses) throw StateError(std::string(op) + ": label out of range");
  }
}

}  // namespace

int ProbeModel::predict(const std::vector<float>& descriptor) const {
  if (static_cast<std::int64_t>(descriptor.size()) != dim) {
    throw DimensionError("probe: expected descriptor of length " + std::to_string(dim) + ", got " +
                         std::to_string(descriptor.size()));
  }
  const auto p = class_probs(*this, standardize(*this, descriptor));
  int best = 0;
  for (int c = 1; c < kProbeClasses; ++c) {
    if (p[c] > p[best]) best = c;
  }
  return best;
}

std::vector<float> extract_descriptor(const SpmkdModel<float>& model, const PressureMap& map) {
  const std::int64_t s = model.config().encoder.input_size;
  if (map.size % s != 0) {
    throw ConfigError("probe: map resolution " + std::to_string(map.size) +
                      " is not a multiple of input size " + std::to_string(s));
  }
  auto input = map_to_tensor<float>(downsample_area(normalize_unit(map), s));
  return model.forward(input).keypoints.descriptors.values();
}

ProbeSet extract_features(const SpmkdModel<float>& model, const Dataset& ds,
                          const std::vector<std::size_t>& indices) {
  ProbeSet out;
  for (std::size_t idx : indices) {
    const auto& sample = ds.samples.at(idx);
    if (!sample.has_pose) continue;
    out.features.push_back(extract_descriptor(model, sample.map));
    out.labels.push_back(static_cast<int>(sample.pose.posture));
  }
  return out;
}

ProbeModel fit_probe(const ProbeSet& data, std::int64_t iters, double lr) {
  check_set(data, "fit_probe");
  if (iters < 1) throw ConfigError("fit_probe: iters must be >= 1");
  if (!(lr > 0)) throw ConfigError("fit_probe: lr must be positive");
  {
    const int first = data.labels.front();
    bool mixed = false;
    for (int y : data.labels) mixed = mixed || y != first;
    if (!mixed) throw StateError("fit_probe: degenerate data, single class " + std::to_string(first));
  }

  const auto n = data.features.size();
  const auto dim = static_cast<std::int64_t>(data.features.front().size());
  ProbeModel m;
  m.dim = dim;
  m.weight.assign(static_cast<std::size_t>(kProbeClasses * dim), 0.0);
  for (int c = 0; c < kProbeClasses; ++c) m.classes[c] = posture_name(static_cast<Posture>(c));

  // Per-dimension standardization; constant dimensions get unit scale.
  m.feat_mean.assign(dim, 0.0);
  m.feat_std.assign(dim, 0.0);
  for (const auto& f : data.features) {
    for (std::int64_t d = 0; d < dim; ++d) m.feat_mean[d] += f[d];
  }
  for (auto& v : m.feat_mean) v /= static_cast<double>(n);
  for (const auto& f : data.features) {
    for (std::int64_t d = 0; d < dim; ++d) {
      const double c = f[d] - m.feat_mean[d];
      m.feat_std[d] += c * c;
    }
  }
  for (auto& v : m.feat_std) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v < 1e-8) v = 1.0;
  }

  std::vector<std::vector<double>> x;
  x.reserve(n);
  for (const auto& f : data.features) x.push_back(standardize(m, f));

  std::vector<double> gw(m.weight.size());
  std::array<double, kProbeClasses> gb{};
  for (std::int64_t it = 0; it < iters; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    gb.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto p = class_probs(m, x[i]);
      p[data.labels[i]] -= 1.0;  // dL/dz = softmax - onehot
      for (int c = 0; c < kProbeClasses; ++c) {
        gb[c] += p[c];
        double* row = gw.data() + c * dim;
        for (std::int64_t d = 0; d < dim; ++d) row[d] += p[c] * x[i][d];
      }
    }
    const double scale = lr / static_cast<double>(n);
    for (std::size_t j = 0; j < gw.size(); ++j) m.weight[j] -= scale * gw[j];
    for (int c = 0; c < kProbeClasses; ++c) m.bias[c] -= scale * gb[c];
  }

  for (double w : m.weight) {
    if (!std::isfinite(w)) throw NumericError("fit_probe: non-finite weights after fitting");
  }
  return m;
}

ProbeEval evaluate_probe(const ProbeModel& probe, const ProbeSet& data) {
  check_set(data, "evaluate_probe");
  ProbeEval eval;
  eval.count = static_cast<std::int64_t>(data.size());
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int pred = probe.predict(data.features[i]);
    eval.confusion[data.labels[i]][pred] += 1;
    if (pred == data.labels[i]) ++correct;
  }
  eval.accuracy = static_cast<double>(correct) / static_cast<double>(eval.count);
  return eval;
}

void append_probe_results(const std::string& path, const std::string& tag, const ProbeEval& eval) {
  if (tag.find_first_of(",\n\"") != std::string::npos) {
    throw ConfigError("probe results: tag must not contain commas, quotes, or newlines");
  }
  const bool fresh = !std::filesystem::exists(path);
  FILE* f = std::fopen(path.c_str(), "a");
  if (!f) throw IoError("probe results: cannot open '" + path + "' for append");
  if (fresh) {
    std::fputs("tag,count,accuracy,c00,c01,c02,c10,c11,c12,c20,c21,c22\n", f);
  }
  std::string row = tag;
  row += "," + format_csv_value(static_cast<double>(eval.count));
  row += "," + format_csv_value(eval.accuracy);
  for (int r = 0; r < kProbeClasses; ++r) {
    for (int c = 0; c < kProbeClasses; ++c) {
      row += "," + format_csv_value(static_cast<double>(eval.confusion[r][c]));
    }
  }
  row += "\n";
  if (std::fputs(row.c_str(), f) == EOF) {
    std::fclose(f);
    throw IoError("probe results: write failed for '" + path + "'");
  }
  std::fclose(f);
}

}  // namespace spmkd
