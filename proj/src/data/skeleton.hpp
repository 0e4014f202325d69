#pragma once

// Synthetic in-bed pressure generator. A 14-joint skeleton is posed from one
// of three posture templates plus seeded jitter, then each bone deposits a
// capsule of pressure: constant profile along the segment, Gaussian across
// it, truncated at 3 sigma so maps have compact support. Kernel mass is
// weighted per body part (torso and hips carry most of the load) and the
// whole map is rescaled to a fixed body weight before sensor noise.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "data/pressure.hpp"

namespace spmkd {

enum class Posture : int {
  kSupine = 0,
  kLeftLateral = 1,
  kRightLateral = 2,
};

inline constexpr int kPostureCount = 3;
inline constexpr int kJointCount = 14;

const char* posture_name(Posture p);
Posture posture_from_name(const std::string& name);  // ConfigError on unknown labels

extern const std::array<const char*, kJointCount> kJointNames;

struct SkeletonPose {
  // (x, y) in normalized [0,1]^2; x is the column axis, y the row axis.
  std::array<std::array<double, 2>, kJointCount> joints{};
  Posture posture = Posture::kSupine;

  void validate() const;  // StateError if any joint leaves [0,1]^2
};

struct GeneratorConfig {
  std::int64_t map_size = 256;
  std::uint64_t seed = 0;        // dataset-level seed, mixed with the sample seed
  double noise_sigma = 0.0;      // additive Gaussian sensor noise, clipped at 0
  double kernel_sigma = 0.03;    // across-bone Gaussian width, normalized units
  double jitter = 0.02;          // per-joint placement jitter, normalized units
  double body_weight = 2500.0;   // total map mass at map_size 256, scaled by area

  void validate() const;
};

struct SyntheticSample {
  PressureMap map;
  SkeletonPose pose;
  bool has_pose = true;  // false when a stored sample lost its sidecar
  std::uint64_t seed = 0;
};

// Posture template with seeded jitter; joints clamped inside the mat margin.
SkeletonPose make_pose(Posture posture, double jitter, Rng& rng);

// Deposits the pose's bone capsules onto a map, rescales total mass to the
// configured body weight, then applies clipped sensor noise.
PressureMap render_pose(const SkeletonPose& pose, const GeneratorConfig& cfg, Rng& noise_rng);

// posture = seed % 3 (round-robin when callers use consecutive sample seeds).
SyntheticSample generate_sample(std::uint64_t sample_seed, const GeneratorConfig& cfg);

}  // namespace spmkd
