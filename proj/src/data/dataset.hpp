#pragma once

// On-disk dataset layout:
//
//   <dir>/manifest.txt        key=value: count, split string, generator config
//   <dir>/samples/NNNNNN.png  16-bit grayscale pressure payload
//   <dir>/samples/NNNNNN.meta key=value sidecar: seed, posture, joints
//
// The split string assigns 't' (train) or 'v' (validation) per sample; every
// fifth sample is validation. A sample whose sidecar went missing still loads
// (map only, has_pose = false); a malformed PNG or manifest does not.

#include <cstdint>
#include <string>
#include <vector>

#include "data/skeleton.hpp"

namespace spmkd {

struct DatasetManifest {
  std::int64_t count = 0;
  std::string split;  // one char per sample: 't' or 'v'
  GeneratorConfig gen;
  std::uint64_t config_hash = 0;  // hash of the generator config's canonical text
};

struct Dataset {
  std::string root;
  DatasetManifest manifest;
  std::vector<SyntheticSample> samples;

  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> val_indices() const;
};

std::string sample_png_path(const std::string& dir, std::int64_t index);
std::string sample_meta_path(const std::string& dir, std::int64_t index);

std::uint64_t generator_config_hash(const GeneratorConfig& cfg);

void save_sample(const std::string& dir, std::int64_t index, const SyntheticSample& sample);
SyntheticSample load_sample(const std::string& dir, std::int64_t index);

// Generates `count` samples with per-sample seeds 0..count-1 and writes the
// manifest. The directory is created if needed; existing files are replaced.
DatasetManifest generate_dataset(const std::string& dir, const GeneratorConfig& cfg,
                                 std::int64_t count);

Dataset load_dataset(const std::string& dir);

}  // namespace spmkd
