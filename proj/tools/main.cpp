// spmkd command-line front end. Everything goes through the C API in
// spmkd/spmkd.h; this translation unit never sees the C++ core.
//
// Exit codes: 0 success, 1 runtime failure (message on stderr), 2 usage error.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spmkd/spmkd.h>

namespace {

bool ok(spmkd_status status) {
  if (status == SPMKD_OK) return true;
  std::fprintf(stderr, "error: %s\n", spmkd_last_error());
  return false;
}

struct ConfigHandle {
  spmkd_config* ptr = nullptr;
  ~ConfigHandle() { spmkd_config_destroy(ptr); }
};

// Shared by every config-driven command: file, then --set overrides in order.
bool load_config(const std::string& path, const std::vector<std::string>& sets, ConfigHandle& out) {
  if (!ok(spmkd_config_load(path.c_str(), &out.ptr))) return false;
  for (const auto& assignment : sets) {
    if (!ok(spmkd_config_set(out.ptr, assignment.c_str()))) return false;
  }
  return true;
}

const char* c_str_or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spmkd: self-supervised pressure-map keypoints"};
  app.require_subcommand(1);
  app.set_version_flag("--version", []() { return std::string(spmkd_version()); });

  // gen-data
  std::string gen_out;
  std::int64_t gen_count = 0;
  std::uint64_t gen_seed = 0;
  double gen_noise = 0.0;
  std::int64_t gen_size = 256;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic pressure-map dataset");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--count", gen_count, "Number of samples")->required();
  gen->add_option("--seed", gen_seed, "Base generator seed");
  gen->add_option("--noise", gen_noise, "Sensor noise sigma");
  gen->add_option("--size", gen_size, "Map resolution in pixels");

  // train
  std::string train_config;
  std::vector<std::string> train_sets;
  bool no_crwt = false;
  auto* train = app.add_subcommand("train", "Run two-phase training from a config file");
  train->add_option("--config", train_config, "Run config file")->required();
  train->add_option("--set", train_sets, "Override one key=value (repeatable)");
  train->add_flag("--no-crwt", no_crwt, "Skip phase 1: spend the whole budget on reconstruction");

  // eval-probe
  std::string ep_ckpt, ep_data, ep_shifted, ep_config, ep_out;
  auto* ep = app.add_subcommand("eval-probe", "Fit and score a linear posture probe");
  ep->add_option("--ckpt", ep_ckpt, "Model checkpoint")->required();
  ep->add_option("--data", ep_data, "Dataset directory (fit on train split, score both)")->required();
  ep->add_option("--shifted-data", ep_shifted, "Extra dataset scored with the same probe");
  ep->add_option("--config", ep_config, "Run config (default: config.txt beside the checkpoint)");
  ep->add_option("--out", ep_out, "Results CSV (default: probe_results.csv beside the checkpoint)");

  // reconstruct
  std::string rc_ckpt, rc_input, rc_out, rc_config;
  std::string rc_palette = "intensity";
  auto* rc = app.add_subcommand("reconstruct", "Render original vs reconstruction side by side");
  rc->add_option("--ckpt", rc_ckpt, "Model checkpoint")->required();
  rc->add_option("--input", rc_input, "16-bit grayscale pressure PNG")->required();
  rc->add_option("--out", rc_out, "Output PNG")->required();
  rc->add_option("--palette", rc_palette, "binary or intensity")
      ->check(CLI::IsMember({"binary", "intensity"}));
  rc->add_option("--config", rc_config, "Run config (default: config.txt beside the checkpoint)");

  // gradcheck
  std::string gc_config;
  std::vector<std::string> gc_sets;
  double gc_tol = 1e-4;
  double gc_step = 1e-5;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference audit of analytic gradients");
  gc->add_option("--config", gc_config, "Run config file")->required();
  gc->add_option("--set", gc_sets, "Override one key=value (repeatable)");
  gc->add_option("--tolerance", gc_tol, "Max allowed relative error");
  gc->add_option("--step", gc_step, "Central-difference step");

  // count-ops
  std::string co_config;
  std::vector<std::string> co_sets;
  auto* co = app.add_subcommand("count-ops", "Analytic FLOP/parameter table");
  co->add_option("--config", co_config, "Run config file")->required();
  co->add_option("--set", co_sets, "Override one key=value (repeatable)");

  // export-curves
  std::string ec_metrics, ec_out;
  auto* ec = app.add_subcommand("export-curves", "Plot a metrics CSV as PNG line curves");
  ec->add_option("--metrics", ec_metrics, "Metrics CSV")->required();
  ec->add_option("--out", ec_out, "Output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 2;
  }

  if (*gen) {
    if (!ok(spmkd_generate_dataset(gen_out.c_str(), gen_count, gen_seed, gen_noise, gen_size))) {
      return 1;
    }
    std::printf("wrote %lld samples to %s\n", static_cast<long long>(gen_count), gen_out.c_str());
    return 0;
  }

  if (*train) {
    ConfigHandle cfg;
    if (!load_config(train_config, train_sets, cfg)) return 1;
    if (no_crwt && !ok(spmkd_config_set(cfg.ptr, "crwt.enabled=false"))) return 1;
    double final_loss = 0.0;
    if (!ok(spmkd_train(cfg.ptr, &final_loss))) return 1;
    std::printf("final loss %.9g\n", final_loss);
    return 0;
  }

  if (*ep) {
    double train_acc = 0.0, val_acc = 0.0, shifted_acc = 0.0;
    if (!ok(spmkd_eval_probe(ep_ckpt.c_str(), c_str_or_null(ep_config), ep_data.c_str(),
                             c_str_or_null(ep_shifted), c_str_or_null(ep_out), &train_acc, &val_acc,
                             &shifted_acc))) {
      return 1;
    }
    std::printf("train accuracy %.6f\n", train_acc);
    std::printf("val accuracy %.6f\n", val_acc);
    if (!ep_shifted.empty()) std::printf("shifted accuracy %.6f\n", shifted_acc);
    return 0;
  }

  if (*rc) {
    if (!ok(spmkd_reconstruct(rc_ckpt.c_str(), c_str_or_null(rc_config), rc_input.c_str(),
                              rc_out.c_str(), rc_palette.c_str()))) {
      return 1;
    }
    std::printf("wrote %s\n", rc_out.c_str());
    return 0;
  }

  if (*gc) {
    ConfigHandle cfg;
    if (!load_config(gc_config, gc_sets, cfg)) return 1;
    double max_rel_err = 0.0;
    int passed = 0;
    if (!ok(spmkd_gradcheck(cfg.ptr, gc_step, gc_tol, &max_rel_err, &passed))) return 1;
    std::printf("max relative error %.3e (tolerance %.3e): %s\n", max_rel_err, gc_tol,
                passed ? "PASS" : "FAIL");
    return passed ? 0 : 1;
  }

  if (*co) {
    ConfigHandle cfg;
    if (!load_config(co_config, co_sets, cfg)) return 1;
    char* table = nullptr;
    if (!ok(spmkd_count_ops(cfg.ptr, &table))) return 1;
    std::fputs(table, stdout);
    spmkd_string_free(table);
    return 0;
  }

  if (*ec) {
    if (!ok(spmkd_export_curves(ec_metrics.c_str(), ec_out.c_str()))) return 1;
    std::printf("wrote %s\n", ec_out.c_str());
    return 0;
  }

  return 2;  // unreachable: require_subcommand guarantees one branch
}
