#include "spmkd/spmkd.h"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "core/gradcheck.hpp"
#include "core/version.hpp"
#include "data/curves.hpp"
#include "data/dataset.hpp"
#include "data/export.hpp"
#include "data/png_io.hpp"
#include "probe/probe.hpp"
#include "train/crwt.hpp"
#include "train/metrics.hpp"

struct spmkd_config {
  spmkd::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error = "no error";

// Maps the library's exception hierarchy onto status codes; every API body
// runs inside this so no exception ever crosses the C boundary.
template <typename Fn>
spmkd_status wrap(Fn&& fn) {
  try {
    fn();
    return SPMKD_OK;
  } catch (const spmkd::DimensionError& e) {
    g_last_error = e.what();
    return SPMKD_ERR_DIMENSION;
  } catch (const spmkd::ConfigError& e) {
    g_last_error = e.what();
    return SPMKD_ERR_CONFIG;
  } catch (const spmkd::IoError& e) {
    g_last_error = e.what();
    return SPMKD_ERR_IO;
  } catch (const spmkd::ParseError& e) {
    g_last_error = e.what();
    return SPMKD_ERR_PARSE;
  } catch (const spmkd::NumericError& e) {
    g_last_error = e.what();
    return SPMKD_ERR_NUMERIC;
  } catch (const spmkd::TransferError& e) {
    g_last_error = e.what();
    return SPMKD_ERR_TRANSFER;
  } catch (const spmkd::StateError& e) {
    g_last_error = e.what();
    return SPMKD_ERR_STATE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SPMKD_ERR_UNKNOWN;
  } catch (...) {
    g_last_error = "unknown failure";
    return SPMKD_ERR_UNKNOWN;
  }
}

spmkd_status fail_argument(const char* message) {
  g_last_error = message;
  return SPMKD_ERR_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// "config.txt next to the checkpoint" unless the caller named one.
std::string resolve_config_path(const char* ckpt_path, const char* config_path) {
  if (config_path) return config_path;
  return (std::filesystem::path(ckpt_path).parent_path() / "config.txt").string();
}

// Rebuilds the exact checkpointed model: the config supplies the dimensions
// (verified via the embedded hash), the checkpoint phase selects the head.
spmkd::SpmkdModel<float> load_model(const spmkd::Checkpoint& ckpt, const spmkd::RunConfig& cfg) {
  if (ckpt.config_hash != cfg.hash()) {
    throw spmkd::StateError("checkpoint was produced by a different configuration (hash mismatch)");
  }
  auto mc = cfg.to_model_config();
  mc.decoder.head = ckpt.phase == 1 ? spmkd::HeadMode::kClassification : spmkd::HeadMode::kRegression;
  spmkd::SpmkdModel<float> model(mc, static_cast<std::uint64_t>(cfg.seed));
  spmkd::restore_params(ckpt, model.named_params());
  return model;
}

}  // namespace

extern "C" {

const char* spmkd_last_error(void) { return g_last_error.c_str(); }

const char* spmkd_version(void) { return spmkd::version_string(); }

void spmkd_string_free(char* s) { std::free(s); }

spmkd_status spmkd_config_create(spmkd_config** out) {
  if (!out) return fail_argument("spmkd_config_create: out is null");
  return wrap([&] { *out = new spmkd_config{}; });
}

spmkd_status spmkd_config_load(const char* path, spmkd_config** out) {
  if (!path || !out) return fail_argument("spmkd_config_load: path and out must be non-null");
  return wrap([&] { *out = new spmkd_config{spmkd::parse_config_file(path)}; });
}

spmkd_status spmkd_config_set(spmkd_config* cfg, const char* assignment) {
  if (!cfg || !assignment) return fail_argument("spmkd_config_set: cfg and assignment must be non-null");
  return wrap([&] { spmkd::apply_override(cfg->cfg, assignment); });
}

spmkd_status spmkd_config_canonical(const spmkd_config* cfg, char** out_text) {
  if (!cfg || !out_text) return fail_argument("spmkd_config_canonical: cfg and out_text must be non-null");
  return wrap([&] { *out_text = dup_string(cfg->cfg.canonical()); });
}

spmkd_status spmkd_config_hash(const spmkd_config* cfg, uint64_t* out_hash) {
  if (!cfg || !out_hash) return fail_argument("spmkd_config_hash: cfg and out_hash must be non-null");
  return wrap([&] { *out_hash = cfg->cfg.hash(); });
}

void spmkd_config_destroy(spmkd_config* cfg) { delete cfg; }

spmkd_status spmkd_generate_dataset(const char* dir, int64_t count, uint64_t seed,
                                    double noise_sigma, int64_t map_size) {
  if (!dir) return fail_argument("spmkd_generate_dataset: dir is null");
  return wrap([&] {
    spmkd::GeneratorConfig gen;
    gen.seed = static_cast<std::int64_t>(seed);
    gen.noise_sigma = noise_sigma;
    if (map_size > 0) gen.map_size = map_size;
    spmkd::generate_dataset(dir, gen, count);
  });
}

spmkd_status spmkd_train(const spmkd_config* cfg, double* final_loss) {
  if (!cfg) return fail_argument("spmkd_train: cfg is null");
  return wrap([&] {
    auto result = spmkd::run_crwt(cfg->cfg);
    if (final_loss) *final_loss = result.final_loss;
  });
}

spmkd_status spmkd_eval_probe(const char* ckpt_path, const char* config_path, const char* data_dir,
                              const char* shifted_dir, const char* results_csv, double* train_acc,
                              double* val_acc, double* shifted_acc) {
  if (!ckpt_path || !data_dir) {
    return fail_argument("spmkd_eval_probe: ckpt_path and data_dir must be non-null");
  }
  return wrap([&] {
    const auto cfg = spmkd::parse_config_file(resolve_config_path(ckpt_path, config_path));
    const auto ckpt = spmkd::load_checkpoint(ckpt_path);
    auto model = load_model(ckpt, cfg);

    const auto ds = spmkd::load_dataset(data_dir);
    auto train = spmkd::extract_features(model, ds, ds.train_indices());
    auto val = spmkd::extract_features(model, ds, ds.val_indices());
    auto probe = spmkd::fit_probe(train, cfg.probe_iters, cfg.probe_lr);

    const std::string out = results_csv
        ? results_csv
        : (std::filesystem::path(ckpt_path).parent_path() / "probe_results.csv").string();
    const auto on_train = spmkd::evaluate_probe(probe, train);
    spmkd::append_probe_results(out, "train", on_train);
    if (train_acc) *train_acc = on_train.accuracy;
    const auto on_val = spmkd::evaluate_probe(probe, val);
    spmkd::append_probe_results(out, "val", on_val);
    if (val_acc) *val_acc = on_val.accuracy;

    if (shifted_dir) {
      const auto shifted = spmkd::load_dataset(shifted_dir);
      std::vector<std::size_t> all(shifted.samples.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const auto on_shifted =
          spmkd::evaluate_probe(probe, spmkd::extract_features(model, shifted, all));
      spmkd::append_probe_results(out, "shifted", on_shifted);
      if (shifted_acc) *shifted_acc = on_shifted.accuracy;
    }
  });
}

spmkd_status spmkd_reconstruct(const char* ckpt_path, const char* config_path,
                               const char* input_png, const char* out_png, const char* palette) {
  if (!ckpt_path || !input_png || !out_png) {
    return fail_argument("spmkd_reconstruct: ckpt_path, input_png, and out_png must be non-null");
  }
  return wrap([&] {
    const auto cfg = spmkd::parse_config_file(resolve_config_path(ckpt_path, config_path));
    const auto ckpt = spmkd::load_checkpoint(ckpt_path);
    auto model = load_model(ckpt, cfg);

    spmkd::validate_png_file(input_png);
    const auto source = spmkd::dequantize_map(spmkd::read_png_gray16(input_png));
    const auto unit = spmkd::normalize_unit(source);
    const std::int64_t s = model.config().encoder.input_size;
    if (unit.size % s != 0) {
      throw spmkd::ConfigError("reconstruct: input resolution " + std::to_string(unit.size) +
                               " is not a multiple of model input size " + std::to_string(s));
    }
    auto recon =
        model.forward(spmkd::map_to_tensor<float>(spmkd::downsample_area(unit, s))).reconstruction;

    // Regression output is the map itself; the classification head renders
    // its channel-1 presence probability.
    const auto& shape = recon.shape();
    spmkd::PressureMap right;
    right.size = shape[2];
    const auto hw = static_cast<std::size_t>(shape[2] * shape[3]);
    const std::size_t offset = shape[1] == 2 ? hw : 0;
    right.values.assign(recon.values().begin() + offset, recon.values().begin() + offset + hw);

    spmkd::export_side_by_side(unit, right, out_png,
                               spmkd::palette_from_name(palette ? palette : "intensity"));
  });
}

spmkd_status spmkd_gradcheck(const spmkd_config* cfg, double step, double tolerance,
                             double* max_rel_err, int* passed) {
  if (!cfg) return fail_argument("spmkd_gradcheck: cfg is null");
  if (!(tolerance > 0)) return fail_argument("spmkd_gradcheck: tolerance must be positive");
  return wrap([&] {
    const auto& run = cfg->cfg;
    run.validate();
    auto mc = run.to_model_config();
    mc.decoder.head = spmkd::HeadMode::kRegression;
    spmkd::SpmkdModel<double> model(mc, static_cast<std::uint64_t>(run.seed));

    spmkd::GeneratorConfig gen;
    gen.map_size = mc.encoder.input_size;
    gen.seed = run.seed;
    const auto sample = spmkd::generate_sample(0, gen);
    const auto unit = spmkd::normalize_unit(sample.map);
    const auto plain = spmkd::map_to_tensor<double>(unit);
    auto input = spmkd::Tensor<double>::from(plain.shape(), plain.values(), true);
    auto target = spmkd::map_to_tensor<double>(
        spmkd::downsample_area(unit, mc.decoder.output_resolution));

    // The input plus every small tensor: biases and low-rank projections
    // cover all modules while keeping the FD sweep tractable.
    std::vector<std::pair<std::string, spmkd::Tensor<double>>> audited;
    audited.emplace_back("input", input);
    for (auto& [name, t] : model.named_params()) {
      if (t.values().size() <= 128) audited.emplace_back(name, t);
    }

    auto loss_fn = [&] { return spmkd::combined_loss(model.forward(input).reconstruction, target, run.loss); };
    const double h = step > 0 ? step : 1e-5;
    auto report = spmkd::grad_check<double>(loss_fn, audited, h, tolerance);
    if (max_rel_err) *max_rel_err = report.max_rel_err;
    if (passed) *passed = report.all_passed ? 1 : 0;
  });
}

spmkd_status spmkd_count_ops(const spmkd_config* cfg, char** out_table) {
  if (!cfg || !out_table) return fail_argument("spmkd_count_ops: cfg and out_table must be non-null");
  return wrap([&] {
    cfg->cfg.validate();
    spmkd::SpmkdModel<float> model(cfg->cfg.to_model_config(), static_cast<std::uint64_t>(cfg->cfg.seed));
    const auto desc = model.describe();

    std::string text;
    char line[256];
    std::snprintf(line, sizeof line, "%-44s %-28s %14s %12s\n", "layer", "detail", "flops", "params");
    text += line;
    for (const auto& row : desc) {
      std::snprintf(line, sizeof line, "%-44s %-28s %14" PRId64 " %12" PRId64 "\n", row.name.c_str(),
                    row.detail.c_str(), row.count.flops, row.count.params);
      text += line;
    }
    const auto enc = spmkd::count_ops_prefix(desc, "encoder");
    const auto fus = spmkd::count_ops_prefix(desc, "fuser");
    const auto dec = spmkd::count_ops_prefix(desc, "decoder");
    const auto total = spmkd::count_ops(desc);
    const auto subtotal = [&](const char* name, const spmkd::OpCount& c) {
      std::snprintf(line, sizeof line, "%-44s %-28s %14" PRId64 " %12" PRId64 "\n", name, "",
                    c.flops, c.params);
      text += line;
    };
    text += "\n";
    subtotal("encoder total", enc);
    subtotal("fuser total", fus);
    subtotal("decoder total", dec);
    subtotal("TOTAL", total);
    std::snprintf(line, sizeof line, "\nencoder/decoder parameter ratio: %.6f\n",
                  static_cast<double>(enc.params) / static_cast<double>(dec.params));
    text += line;
    *out_table = dup_string(text);
  });
}

spmkd_status spmkd_export_curves(const char* metrics_csv, const char* out_png) {
  if (!metrics_csv || !out_png) {
    return fail_argument("spmkd_export_curves: metrics_csv and out_png must be non-null");
  }
  return wrap([&] { spmkd::export_curves(spmkd::read_csv(metrics_csv), out_png); });
}

} /* extern "C" */
