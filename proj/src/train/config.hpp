#pragma once

// Run configuration: one key=value text file is the single source of truth
// for an experiment; individual keys can be overridden with dotted
// `key=value` strings (the CLI's --set). The canonical serialization below
// fixes key order and float formatting, so its hash identifies the run.

#include <cstdint>
#include <string>

#include "model/model.hpp"
#include "train/losses.hpp"
#include "train/optim.hpp"

namespace spmkd {

struct RunConfig {
  std::int64_t seed = 1;

  // model
  std::int64_t k = 14;
  std::int64_t f = 8;
  double width_mult = 1.0;
  std::int64_t input_size = 256;
  std::int64_t output_scale = 1;  // decoder output = grid or 4*grid

  // training
  std::int64_t phase1_epochs = 60;
  std::int64_t phase2_epochs = 120;
  std::int64_t batch = 8;
  OptimizerConfig optim;
  LossConfig loss;
  bool crwt_enabled = true;

  // probe
  std::int64_t probe_iters = 500;
  double probe_lr = 0.5;

  // paths
  std::string data_path = "data";
  std::string out_dir = "out";

  void validate() const;

  // Model hyperparameters mapped onto the module configs; width_mult scales
  // encoder and decoder channel counts alike.
  ModelConfig to_model_config() const;

  std::string canonical() const;
  std::uint64_t hash() const;
};

// Defaults overlaid with the file's keys. Line numbers are reported for
// malformed lines (ParseError) and unknown keys or bad values (ConfigError).
RunConfig parse_config_file(const std::string& path);

// Applies one "key=value" override in the same key namespace as the file.
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace spmkd
