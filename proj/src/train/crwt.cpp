#include "train/crwt.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "train/losses.hpp"
#include "train/metrics.hpp"
#include "train/optim.hpp"

namespace spmkd {

namespace {

// Running micro-averaged f-score over an epoch's pixel predictions.
struct FScoreTally {
  std::int64_t tp = 0, fp = 0, fn = 0;

  void add(const std::vector<std::uint8_t>& pred, const Tensor<float>& mask) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] != 0;
      const bool t = mask.values()[i] != 0.0f;
      if (p && t) ++tp;
      else if (p && !t) ++fp;
      else if (!p && t) ++fn;
    }
  }

  double value() const {
    const std::int64_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
};

void check_finite_loss(double loss, const char* phase, std::int64_t epoch, std::size_t sample) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string(phase) + " diverged: non-finite loss at epoch " +
                       std::to_string(epoch) + ", sample " + std::to_string(sample));
  }
}

}  // namespace

TrainSample prepare_sample(const PressureMap& raw, std::int64_t input_size,
                           std::int64_t output_resolution) {
  if (raw.size % input_size != 0 || raw.size % output_resolution != 0) {
    throw ConfigError("training: map resolution " + std::to_string(raw.size) +
                      " is not a multiple of input size " + std::to_string(input_size) +
                      " and output resolution " + std::to_string(output_resolution));
  }
  const PressureMap unit = normalize_unit(raw);
  TrainSample sample;
  sample.input = map_to_tensor<float>(downsample_area(unit, input_size));
  const PressureMap target = downsample_area(unit, output_resolution);
  sample.target = map_to_tensor<float>(target);
  std::vector<float> mask(target.values.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = target.values[i] > 0.0f ? 1.0f : 0.0f;
  sample.mask = Tensor<float>::from({output_resolution, output_resolution}, std::move(mask));
  return sample;
}

std::vector<TrainSample> prepare_training_set(const Dataset& ds, const RunConfig& cfg) {
  const auto model_cfg = cfg.to_model_config();
  const std::int64_t S = model_cfg.encoder.input_size;
  const std::int64_t R = model_cfg.decoder.output_resolution;
  std::vector<TrainSample> out;
  for (std::size_t idx : ds.train_indices()) {
    out.push_back(prepare_sample(ds.samples[idx].map, S, R));
  }
  if (out.empty()) throw StateError("training: dataset has no training split");
  return out;
}

PhaseArtifacts train_phase1(SpmkdModel<float>& model, const std::vector<TrainSample>& data,
                            const RunConfig& cfg) {
  cfg.validate();
  if (model.decoder().head_mode() != HeadMode::kClassification) {
    throw StateError("phase 1 requires the classification head");
  }
  std::filesystem::create_directories(cfg.out_dir);

  Optimizer<float> opt(cfg.optim, model.named_params());
  PhaseArtifacts art;
  art.metrics_path = cfg.out_dir + "/phase1_metrics.csv";
  CsvWriter csv(art.metrics_path, {"epoch", "loss", "f_score"});

  const std::size_t n = data.size();
  const auto batch = static_cast<std::size_t>(cfg.batch);
  for (std::int64_t epoch = 1; epoch <= cfg.phase1_epochs; ++epoch) {
    double loss_sum = 0.0;
    FScoreTally tally;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t m = std::min(batch, n - start);
      opt.zero_grad();
      for (std::size_t i = start; i < start + m; ++i) {
        auto out = model.forward(data[i].input);
        auto loss = pixel_cross_entropy(out.reconstruction, data[i].mask);
        const double value = static_cast<double>(loss.item());
        check_finite_loss(value, "phase 1", epoch, i);
        loss_sum += value;
        tally.add(argmax_mask(out.reconstruction), data[i].mask);
        mul_scalar(loss, 1.0f / static_cast<float>(m)).backward();
      }
      opt.step();
    }
    art.final_loss = loss_sum / static_cast<double>(n);
    csv.row({static_cast<double>(epoch), art.final_loss, tally.value()});
  }

  art.checkpoint =
      snapshot_params(model.named_params(), 1, static_cast<std::uint32_t>(cfg.phase1_epochs), cfg.hash());
  art.checkpoint_path = cfg.out_dir + "/phase1.ckpt";
  save_checkpoint(art.checkpoint, art.checkpoint_path);
  return art;
}

void transfer_weights(const Checkpoint& ckpt, SpmkdModel<float>& model, std::uint64_t head_seed) {
  model.swap_head(HeadMode::kRegression, head_seed);
  restore_params(ckpt, model.named_params(), "decoder.head.");
}

PhaseArtifacts train_phase2(SpmkdModel<float>& model, const std::vector<TrainSample>& data,
                            const RunConfig& cfg, std::int64_t epochs) {
  cfg.validate();
  if (model.decoder().head_mode() != HeadMode::kRegression) {
    throw StateError("phase 2 requires the regression head");
  }
  if (epochs <= 0) epochs = cfg.phase2_epochs;
  const std::int64_t R = cfg.to_model_config().decoder.output_resolution;
  if (cfg.loss.window != SsimWindow::kGlobal && cfg.loss.window_size > R) {
    throw ConfigError("phase 2: ssim window " + std::to_string(cfg.loss.window_size) +
                      " exceeds output resolution " + std::to_string(R));
  }
  std::filesystem::create_directories(cfg.out_dir);

  Optimizer<float> opt(cfg.optim, model.named_params());
  PhaseArtifacts art;
  art.metrics_path = cfg.out_dir + "/phase2_metrics.csv";
  CsvWriter csv(art.metrics_path, {"epoch", "loss", "l1", "l2", "ssim"});

  const std::size_t n = data.size();
  const auto batch = static_cast<std::size_t>(cfg.batch);
  for (std::int64_t epoch = 1; epoch <= epochs; ++epoch) {
    double loss_sum = 0.0, l1_sum = 0.0, l2_sum = 0.0, ssim_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t m = std::min(batch, n - start);
      opt.zero_grad();
      for (std::size_t i = start; i < start + m; ++i) {
        auto out = model.forward(data[i].input);
        auto loss = combined_loss(out.reconstruction, data[i].target, cfg.loss);
        const double value = static_cast<double>(loss.item());
        check_finite_loss(value, "phase 2", epoch, i);
        loss_sum += value;
        auto pred = out.reconstruction.detach();
        l1_sum += l1_metric(pred, data[i].target);
        l2_sum += l2_metric(pred, data[i].target);
        ssim_sum += static_cast<double>(ssim(pred, data[i].target, cfg.loss).item());
        mul_scalar(loss, 1.0f / static_cast<float>(m)).backward();
      }
      opt.step();
    }
    const auto dn = static_cast<double>(n);
    art.final_loss = loss_sum / dn;
    csv.row({static_cast<double>(epoch), art.final_loss, l1_sum / dn, l2_sum / dn, ssim_sum / dn});
  }

  art.checkpoint =
      snapshot_params(model.named_params(), 2, static_cast<std::uint32_t>(epochs), cfg.hash());
  art.checkpoint_path = cfg.out_dir + "/phase2.ckpt";
  save_checkpoint(art.checkpoint, art.checkpoint_path);
  return art;
}

namespace {

// The effective config rides along with the checkpoints so evaluation tools
// can rebuild the exact model later (atomic, like every other artifact).
void write_config_snapshot(const RunConfig& cfg) {
  const std::string path = cfg.out_dir + "/config.txt";
  const std::string tmp = path + ".tmp";
  FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw IoError("training: cannot write '" + tmp + "'");
  const std::string text = cfg.canonical();
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  std::fclose(f);
  if (!ok) throw IoError("training: short write to '" + tmp + "'");
  std::filesystem::rename(tmp, path);
}

}  // namespace

CrwtResult run_crwt(const RunConfig& cfg) {
  cfg.validate();
  const auto ds = load_dataset(cfg.data_path);
  const auto data = prepare_training_set(ds, cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.seed);
  std::filesystem::create_directories(cfg.out_dir);
  write_config_snapshot(cfg);

  CrwtResult result;
  if (cfg.crwt_enabled) {
    SpmkdModel<float> model(cfg.to_model_config(), seed);
    auto p1 = train_phase1(model, data, cfg);
    result.phase1_metrics = p1.metrics_path;
    transfer_weights(p1.checkpoint, model, seed);
    auto p2 = train_phase2(model, data, cfg);
    result.phase2_metrics = p2.metrics_path;
    result.final_checkpoint = p2.checkpoint_path;
    result.final_loss = p2.final_loss;
  } else {
    ModelConfig mc = cfg.to_model_config();
    mc.decoder.head = HeadMode::kRegression;
    SpmkdModel<float> model(mc, seed);
    auto p2 = train_phase2(model, data, cfg, cfg.phase1_epochs + cfg.phase2_epochs);
    result.phase2_metrics = p2.metrics_path;
    result.final_checkpoint = p2.checkpoint_path;
    result.final_loss = p2.final_loss;
  }
  return result;
}

}  // namespace spmkd
