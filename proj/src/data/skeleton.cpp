#include "data/skeleton.hpp"

#include <algorithm>
#include <cmath>

namespace spmkd {

const std::array<const char*, kJointCount> kJointNames = {
    "head",    "neck",    "r_shoulder", "l_shoulder", "r_elbow", "l_elbow", "r_wrist",
    "l_wrist", "r_hip",   "l_hip",      "r_knee",     "l_knee",  "r_ankle", "l_ankle",
};

const char* posture_name(Posture p) {
  switch (p) {
    case Posture::kSupine: return "supine";
    case Posture::kLeftLateral: return "left-lateral";
    case Posture::kRightLateral: return "right-lateral";
  }
  return "?";
}

Posture posture_from_name(const std::string& name) {
  for (int i = 0; i < kPostureCount; ++i) {
    if (name == posture_name(static_cast<Posture>(i))) return static_cast<Posture>(i);
  }
  throw ConfigError("skeleton: unknown posture label '" + name + "'");
}

void SkeletonPose::validate() const {
  for (int j = 0; j < kJointCount; ++j) {
    const double x = joints[j][0], y = joints[j][1];
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
      throw StateError(std::string("skeleton: joint '") + kJointNames[j] + "' out of bounds");
    }
  }
}

void GeneratorConfig::validate() const {
  if (map_size < 8) throw ConfigError("generator: map_size must be >= 8");
  if (noise_sigma < 0) throw ConfigError("generator: noise_sigma must be >= 0");
  if (kernel_sigma <= 0) throw ConfigError("generator: kernel_sigma must be positive");
  if (jitter < 0) throw ConfigError("generator: jitter must be >= 0");
  if (body_weight <= 0) throw ConfigError("generator: body_weight must be positive");
}

namespace {

using Joints = std::array<std::array<double, 2>, kJointCount>;

// Joint order: head neck r_shoulder l_shoulder r_elbow l_elbow r_wrist
// l_wrist r_hip l_hip r_knee l_knee r_ankle l_ankle. x grows to the right of
// the mat, y toward the foot end.
const Joints kSupineTemplate = {{
    {0.50, 0.10}, {0.50, 0.18}, {0.61, 0.24}, {0.39, 0.24}, {0.66, 0.40}, {0.34, 0.40},
    {0.67, 0.55}, {0.33, 0.55}, {0.57, 0.54}, {0.43, 0.54}, {0.57, 0.74}, {0.43, 0.74},
    {0.56, 0.92}, {0.44, 0.92},
}};

// Lying on the left side: shoulders stacked, arms reaching to the right of
// the mat, knees pulled forward (also to the right).
const Joints kLeftLateralTemplate = {{
    {0.44, 0.10}, {0.45, 0.18}, {0.50, 0.23}, {0.43, 0.25}, {0.58, 0.36}, {0.52, 0.38},
    {0.63, 0.49}, {0.58, 0.51}, {0.48, 0.54}, {0.43, 0.56}, {0.62, 0.71}, {0.57, 0.73},
    {0.53, 0.88}, {0.48, 0.90},
}};

Joints mirrored(const Joints& src) {
  Joints out = src;
  for (auto& j : out) j[0] = 1.0 - j[0];
  // Swap left/right joint pairs so "r_*" stays the anatomical right.
  for (int base : {2, 4, 6, 8, 10, 12}) std::swap(out[base], out[base + 1]);
  return out;
}

struct Bone {
  int a;
  int b;
  double load;         // relative pressure amplitude
  double sigma_scale;  // across-bone width multiplier
};

// Torso and pelvis carry most of the body weight; limbs are light.
const Bone kBones[] = {
    {0, 0, 1.2, 1.8},    // head blob
    {0, 1, 0.5, 1.0},    // neck
    {2, 3, 1.5, 1.2},    // shoulder girdle
    {2, 8, 2.5, 1.5},    // torso, right side
    {3, 9, 2.5, 1.5},    // torso, left side
    {8, 9, 2.0, 1.4},    // pelvis
    {2, 4, 0.5, 0.8},  {3, 5, 0.5, 0.8},    // upper arms
    {4, 6, 0.35, 0.7}, {5, 7, 0.35, 0.7},   // forearms
    {8, 10, 1.2, 1.0}, {9, 11, 1.2, 1.0},   // thighs
    {10, 12, 0.7, 0.8}, {11, 13, 0.7, 0.8}, // shins
};

}  // namespace

SkeletonPose make_pose(Posture posture, double jitter, Rng& rng) {
  SkeletonPose pose;
  pose.posture = posture;
  const Joints* base = nullptr;
  switch (posture) {
    case Posture::kSupine: base = &kSupineTemplate; break;
    case Posture::kLeftLateral: base = &kLeftLateralTemplate; break;
    case Posture::kRightLateral: {
      static const Joints right = mirrored(kLeftLateralTemplate);
      base = &right;
      break;
    }
  }
  for (int j = 0; j < kJointCount; ++j) {
    for (int axis = 0; axis < 2; ++axis) {
      const double v = (*base)[j][axis] + rng.normal(0.0, jitter);
      pose.joints[j][axis] = std::clamp(v, 0.04, 0.96);
    }
  }
  return pose;
}

PressureMap render_pose(const SkeletonPose& pose, const GeneratorConfig& cfg, Rng& noise_rng) {
  cfg.validate();
  pose.validate();
  const std::int64_t S = cfg.map_size;
  const double px = static_cast<double>(S - 1);
  std::vector<double> acc(static_cast<std::size_t>(S * S), 0.0);

  for (const Bone& bone : kBones) {
    const double ax = pose.joints[bone.a][0] * px, ay = pose.joints[bone.a][1] * px;
    const double bx = pose.joints[bone.b][0] * px, by = pose.joints[bone.b][1] * px;
    const double sigma = cfg.kernel_sigma * bone.sigma_scale * px;
    const double reach = 3.0 * sigma;
    const double inv_two_s2 = 1.0 / (2.0 * sigma * sigma);

    const auto x0 = static_cast<std::int64_t>(std::floor(std::min(ax, bx) - reach));
    const auto x1 = static_cast<std::int64_t>(std::ceil(std::max(ax, bx) + reach));
    const auto y0 = static_cast<std::int64_t>(std::floor(std::min(ay, by) - reach));
    const auto y1 = static_cast<std::int64_t>(std::ceil(std::max(ay, by) + reach));
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;

    for (std::int64_t y = std::max<std::int64_t>(0, y0); y <= std::min(S - 1, y1); ++y) {
      for (std::int64_t x = std::max<std::int64_t>(0, x0); x <= std::min(S - 1, x1); ++x) {
        // Distance from the pixel to the segment (capsule profile).
        double t = 0.0;
        if (len2 > 0.0) {
          t = std::clamp(((x - ax) * dx + (y - ay) * dy) / len2, 0.0, 1.0);
        }
        const double cx = ax + t * dx, cy = ay + t * dy;
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        if (d2 > reach * reach) continue;
        acc[static_cast<std::size_t>(y * S + x)] += bone.load * std::exp(-d2 * inv_two_s2);
      }
    }
  }

  double total = 0.0;
  for (double v : acc) total += v;
  const double target = cfg.body_weight * (static_cast<double>(S) * S) / (256.0 * 256.0);
  const double scale = total > 0.0 ? target / total : 0.0;

  PressureMap map;
  map.size = S;
  map.values.resize(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    double v = acc[i] * scale;
    if (cfg.noise_sigma > 0.0) v += noise_rng.normal(0.0, cfg.noise_sigma);
    map.values[i] = static_cast<float>(std::max(0.0, v));
  }
  return map;
}

SyntheticSample generate_sample(std::uint64_t sample_seed, const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, sample_seed));
  SyntheticSample sample;
  sample.seed = sample_seed;
  sample.pose = make_pose(static_cast<Posture>(sample_seed % kPostureCount), cfg.jitter, rng);
  sample.map = render_pose(sample.pose, cfg, rng);
  return sample;
}

}  // namespace spmkd
