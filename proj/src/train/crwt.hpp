#pragma once

// Two-phase training orchestration. Phase 1 fits a binary pressure-presence
// classifier (pixel cross entropy on the 2-channel head); phase 2 transfers
// every non-head weight, swaps in the 1-channel regression head, and fits the
// reconstruction under the combined L2 + SSIM loss. Disabling the transfer
// (the ablation) spends the full epoch budget on phase 2 from scratch, so
// paired runs are cost-comparable.

#include <cstdint>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "model/model.hpp"
#include "train/checkpoint.hpp"
#include "train/config.hpp"

namespace spmkd {

struct TrainSample {
  Tensor<float> input;   // (1,1,S,S), unit-normalized pressure
  Tensor<float> mask;    // (R,R), binary presence target for phase 1
  Tensor<float> target;  // (1,1,R,R), unit-normalized reconstruction target
};

// One source map -> one training sample: the map is normalized to [0,1] by
// its own peak, then area-downsampled to the encoder input size and to the
// decoder output resolution. The presence mask is "any pressure in the block".
TrainSample prepare_sample(const PressureMap& raw, std::int64_t input_size,
                           std::int64_t output_resolution);

// prepare_sample over the dataset's train split.
std::vector<TrainSample> prepare_training_set(const Dataset& ds, const RunConfig& cfg);

struct PhaseArtifacts {
  Checkpoint checkpoint;
  std::string checkpoint_path;
  std::string metrics_path;
  double final_loss = 0.0;
};

// Epoch metrics: epoch, loss, f_score. Requires the classification head.
PhaseArtifacts train_phase1(SpmkdModel<float>& model, const std::vector<TrainSample>& data,
                            const RunConfig& cfg);

// Loads all non-head tensors byte-exactly and reinitializes the regression
// head from the seed. The model leaves in regression mode.
void transfer_weights(const Checkpoint& ckpt, SpmkdModel<float>& model, std::uint64_t head_seed);

// Epoch metrics: epoch, loss, l1, l2, ssim. Requires the regression head.
// `epochs` overrides cfg.phase2_epochs when positive (the ablation's merged
// budget); pass 0 or negative to use the config value.
PhaseArtifacts train_phase2(SpmkdModel<float>& model, const std::vector<TrainSample>& data,
                            const RunConfig& cfg, std::int64_t epochs = 0);

struct CrwtResult {
  std::string final_checkpoint;
  std::string phase1_metrics;  // empty when the transfer is disabled
  std::string phase2_metrics;
  double final_loss = 0.0;
};

// End to end: phase 1 -> transfer -> phase 2 when cfg.crwt_enabled, otherwise
// a single phase-2 run with the combined epoch budget. Artifacts land under
// cfg.out_dir.
CrwtResult run_crwt(const RunConfig& cfg);

}  // namespace spmkd
