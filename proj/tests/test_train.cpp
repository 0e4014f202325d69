#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "core/ops.hpp"
#include "test_support.hpp"
#include "train/checkpoint.hpp"
#include "train/config.hpp"
#include "train/metrics.hpp"
#include "train/optim.hpp"

using spmkd::OptimizerConfig;
using spmkd::OptimizerKind;
using spmkd::ParamList;
using spmkd::TensorD;
using testutil::TempDir;

namespace {

// One gradient-descent target shared by the optimizer cases: f(x) = |x - c|^2.
TensorD quadratic_loss(const TensorD& x, const TensorD& c) {
  auto d = spmkd::sub(x, c);
  return spmkd::sum_all(spmkd::mul(d, d));
}

}  // namespace

// ===========================================================================
// optimizers
// ===========================================================================

TEST_CASE("sgd: exact first step and convergence on a quadratic") {
  auto x = TensorD::from({3}, {5.0, -2.0, 0.5}, true);
  auto c = TensorD::from({3}, {1.0, 1.0, 1.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kSgd;
  cfg.lr = 0.1;
  spmkd::Optimizer<double> opt(cfg, {{"x", x}});

  opt.zero_grad();
  quadratic_loss(x, c).backward();
  opt.step();
  // x1 = x0 - lr * 2 (x0 - c)
  CHECK(x.values()[0] == doctest::Approx(5.0 - 0.1 * 2 * 4.0).epsilon(1e-12));
  CHECK(x.values()[1] == doctest::Approx(-2.0 - 0.1 * 2 * -3.0).epsilon(1e-12));

  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    quadratic_loss(x, c).backward();
    opt.step();
  }
  for (double v : x.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("momentum: matches a hand-rolled velocity recurrence") {
  auto x = TensorD::from({2}, {3.0, -4.0}, true);
  auto c = TensorD::from({2}, {0.0, 0.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kMomentum;
  cfg.lr = 0.05;
  cfg.momentum = 0.9;
  spmkd::Optimizer<double> opt(cfg, {{"x", x}});

  std::vector<double> ref = x.values();
  std::vector<double> vel(2, 0.0);
  for (int step = 0; step < 5; ++step) {
    opt.zero_grad();
    quadratic_loss(x, c).backward();
    opt.step();
    for (int j = 0; j < 2; ++j) {
      vel[j] = 0.9 * vel[j] + 2.0 * ref[j];
      ref[j] -= 0.05 * vel[j];
    }
    CHECK(x.values()[0] == doctest::Approx(ref[0]).epsilon(1e-12));
    CHECK(x.values()[1] == doctest::Approx(ref[1]).epsilon(1e-12));
  }
}

TEST_CASE("adam: matches the bias-corrected moment recurrence") {
  auto x = TensorD::from({2}, {1.0, -2.0}, true);
  auto c = TensorD::from({2}, {0.0, 0.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kAdam;
  cfg.lr = 0.1;
  spmkd::Optimizer<double> opt(cfg, {{"x", x}});

  std::vector<double> ref = x.values();
  std::vector<double> m(2, 0.0), v(2, 0.0);
  for (int step = 1; step <= 4; ++step) {
    opt.zero_grad();
    quadratic_loss(x, c).backward();
    opt.step();
    for (int j = 0; j < 2; ++j) {
      const double g = 2.0 * ref[j];
      m[j] = 0.9 * m[j] + 0.1 * g;
      v[j] = 0.999 * v[j] + 0.001 * g * g;
      const double mhat = m[j] / (1.0 - std::pow(0.9, step));
      const double vhat = v[j] / (1.0 - std::pow(0.999, step));
      ref[j] -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    }
    CHECK(x.values()[0] == doctest::Approx(ref[0]).epsilon(1e-12));
    CHECK(x.values()[1] == doctest::Approx(ref[1]).epsilon(1e-12));
  }

  // First Adam step has magnitude ~lr regardless of gradient scale.
  auto y = TensorD::from({1}, {1e6}, true);
  spmkd::Optimizer<double> opt2(cfg, {{"y", y}});
  opt2.zero_grad();
  spmkd::sum_all(spmkd::mul(y, y)).backward();
  opt2.step();
  CHECK(std::abs(y.values()[0] - 1e6) == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("optimizer: identical runs take identical trajectories") {
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kMomentum, OptimizerKind::kAdam}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    std::vector<std::vector<double>> finals;
    for (int run = 0; run < 2; ++run) {
      auto x = TensorD::from({4}, {1.0, -1.0, 2.0, -2.0}, true);
      auto c = TensorD::from({4}, {0.5, 0.5, 0.5, 0.5});
      spmkd::Optimizer<double> opt(cfg, {{"x", x}});
      for (int i = 0; i < 20; ++i) {
        opt.zero_grad();
        quadratic_loss(x, c).backward();
        opt.step();
      }
      finals.push_back(x.values());
    }
    CHECK(std::memcmp(finals[0].data(), finals[1].data(), 4 * sizeof(double)) == 0);
  }
}

TEST_CASE("optimizer: a parameter with no gradient is left in place by sgd") {
  auto x = TensorD::from({2}, {1.0, 2.0}, true);
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kSgd;
  spmkd::Optimizer<double> opt(cfg, {{"x", x}});
  opt.step();  // no backward ran
  CHECK(x.values()[0] == 1.0);
  CHECK(x.values()[1] == 2.0);
}

TEST_CASE("optimizer: config validation") {
  OptimizerConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(spmkd::Optimizer<double>(cfg, {}), spmkd::ConfigError);
  cfg = OptimizerConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(spmkd::Optimizer<double>(cfg, {}), spmkd::ConfigError);
  cfg = OptimizerConfig{};
  cfg.beta2 = 1.0;
  CHECK_THROWS_AS(spmkd::Optimizer<double>(cfg, {}), spmkd::ConfigError);
}

// ===========================================================================
// checkpoints
// ===========================================================================

namespace {

ParamList<float> demo_params(float scale) {
  ParamList<float> params;
  params.emplace_back("encoder.conv.weight",
                      spmkd::Tensor<float>::from({2, 3}, {1 * scale, 2, 3, 4, 5, 6}, true));
  params.emplace_back("decoder.head.weight",
                      spmkd::Tensor<float>::from({2, 2}, {9 * scale, 8, 7, 6}, true));
  params.emplace_back("decoder.head.bias", spmkd::Tensor<float>::from({2}, {0.5f, -0.5f * scale}, true));
  return params;
}

}  // namespace

TEST_CASE("checkpoint: save/load roundtrip is byte-exact") {
  TempDir dir("ckpt_roundtrip");
  auto params = demo_params(1.0f);
  auto ckpt = spmkd::snapshot_params(params, 1, 42, 0xdeadbeefcafe1234ull);
  const std::string path = dir.file("a.ckpt");
  spmkd::save_checkpoint(ckpt, path);
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));

  auto loaded = spmkd::load_checkpoint(path);
  CHECK(loaded.version == spmkd::kCheckpointVersion);
  CHECK(loaded.phase == 1);
  CHECK(loaded.epoch == 42);
  CHECK(loaded.config_hash == 0xdeadbeefcafe1234ull);
  REQUIRE(loaded.entries.size() == 3);
  CHECK(loaded.entries[0].name == "encoder.conv.weight");
  CHECK(loaded.entries[0].shape == spmkd::Shape{2, 3});
  CHECK(loaded.entries[0].dtype == spmkd::Dtype::kF32);
  for (std::size_t i = 0; i < ckpt.entries.size(); ++i) {
    CHECK(loaded.entries[i].payload == ckpt.entries[i].payload);
  }

  // Saving what was loaded reproduces the file bit for bit.
  const std::string again = dir.file("b.ckpt");
  spmkd::save_checkpoint(loaded, again);
  CHECK(testutil::read_file_bytes(path) == testutil::read_file_bytes(again));
}

TEST_CASE("checkpoint: restore copies payloads byte-exactly") {
  TempDir dir("ckpt_restore");
  auto source = demo_params(3.0f);
  auto ckpt = spmkd::snapshot_params(source, 1, 1, 7);
  auto target = demo_params(1.0f);
  spmkd::restore_params(ckpt, target);
  for (std::size_t i = 0; i < source.size(); ++i) {
    CHECK(std::memcmp(source[i].second.values().data(), target[i].second.values().data(),
                      source[i].second.values().size() * sizeof(float)) == 0);
  }
}

TEST_CASE("checkpoint: skip prefix leaves the head untouched and restores the rest") {
  auto source = demo_params(2.0f);
  auto ckpt = spmkd::snapshot_params(source, 1, 1, 7);
  auto target = demo_params(1.0f);
  const auto head_before = target[1].second.values();
  spmkd::restore_params(ckpt, target, "decoder.head.");
  CHECK(target[0].second.values() == source[0].second.values());
  CHECK(target[1].second.values() == head_before);
  CHECK(target[2].second.values()[1] == -0.5f);  // head bias also skipped
}

TEST_CASE("checkpoint: transfer mismatches are reported with every offender") {
  auto source = demo_params(1.0f);
  auto ckpt = spmkd::snapshot_params(source, 1, 1, 7);

  ParamList<float> target;
  target.emplace_back("encoder.conv.weight", spmkd::Tensor<float>::zeros({3, 3}, true));  // wrong shape
  target.emplace_back("decoder.head.weight", spmkd::Tensor<float>::zeros({2, 2}, true));
  target.emplace_back("decoder.extra", spmkd::Tensor<float>::zeros({1}, true));  // not in ckpt
  try {
    spmkd::restore_params(ckpt, target);
    FAIL("expected TransferError");
  } catch (const spmkd::TransferError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("encoder.conv.weight") != std::string::npos);
    CHECK(msg.find("decoder.extra") != std::string::npos);
    CHECK(msg.find("decoder.head.bias") != std::string::npos);  // ckpt entry without a home
  }
}

TEST_CASE("checkpoint: corruption is rejected with an offset") {
  TempDir dir("ckpt_corrupt");
  auto ckpt = spmkd::snapshot_params(demo_params(1.0f), 2, 9, 1);
  const std::string path = dir.file("c.ckpt");
  spmkd::save_checkpoint(ckpt, path);
  const std::string good = testutil::read_file_bytes(path);

  {
    std::string bad = good;
    bad[0] = 'X';
    testutil::write_file_bytes(path, bad);
    CHECK_THROWS_AS(spmkd::load_checkpoint(path), spmkd::ParseError);
  }
  {
    std::string bad = good.substr(0, good.size() - 5);
    testutil::write_file_bytes(path, bad);
    try {
      spmkd::load_checkpoint(path);
      FAIL("expected ParseError");
    } catch (const spmkd::ParseError& e) {
      CHECK(e.offset > 0);
    }
  }
  {
    std::string bad = good + "zz";
    testutil::write_file_bytes(path, bad);
    CHECK_THROWS_AS(spmkd::load_checkpoint(path), spmkd::ParseError);
  }
  CHECK_THROWS_AS(spmkd::load_checkpoint(dir.file("missing.ckpt")), spmkd::IoError);

  spmkd::Checkpoint dup;
  dup.entries.push_back(spmkd::make_entry<float>("w", spmkd::Tensor<float>::zeros({1})));
  dup.entries.push_back(spmkd::make_entry<float>("w", spmkd::Tensor<float>::zeros({1})));
  CHECK_THROWS_AS(spmkd::save_checkpoint(dup, dir.file("dup.ckpt")), spmkd::StateError);
}

TEST_CASE("checkpoint: f64 entries roundtrip and dtype mismatches are caught") {
  TempDir dir("ckpt_f64");
  ParamList<double> params;
  params.emplace_back("x", TensorD::from({2}, {1.25, -2.5}, true));
  auto ckpt = spmkd::snapshot_params(params, 0, 0, 0);
  const std::string path = dir.file("d.ckpt");
  spmkd::save_checkpoint(ckpt, path);
  auto loaded = spmkd::load_checkpoint(path);
  CHECK(loaded.entries[0].dtype == spmkd::Dtype::kF64);
  CHECK(spmkd::entry_values<double>(loaded.entries[0]) == std::vector<double>{1.25, -2.5});
  CHECK_THROWS_AS(spmkd::entry_values<float>(loaded.entries[0]), spmkd::StateError);

  ParamList<float> wrong;
  wrong.emplace_back("x", spmkd::Tensor<float>::zeros({2}, true));
  CHECK_THROWS_AS(spmkd::restore_params(loaded, wrong), spmkd::TransferError);
}

// ===========================================================================
// run config
// ===========================================================================

TEST_CASE("config: file parsing, overrides, and unknown keys") {
  TempDir dir("config_parse");
  const std::string path = dir.file("run.cfg");
  testutil::write_file_bytes(path,
                             "# training recipe\n"
                             "seed = 7\n"
                             "k=6\n"
                             "f = 4\n"
                             "width_mult = 0.25\n"
                             "input_size = 32\n"
                             "phase1.epochs = 40\n"
                             "phase2.epochs = 80\n"
                             "batch = 4\n"
                             "lr = 0.002\n"
                             "optimizer = momentum\n"
                             "alpha = 1.5\n"
                             "beta = 0.5\n"
                             "ssim.window = global\n"
                             "crwt.enabled = false\n"
                             "data.path = /tmp/ds\n"
                             "out.dir = /tmp/out  # trailing comment\n");
  auto cfg = spmkd::parse_config_file(path);
  CHECK(cfg.seed == 7);
  CHECK(cfg.k == 6);
  CHECK(cfg.f == 4);
  CHECK(cfg.width_mult == 0.25);
  CHECK(cfg.input_size == 32);
  CHECK(cfg.phase1_epochs == 40);
  CHECK(cfg.phase2_epochs == 80);
  CHECK(cfg.batch == 4);
  CHECK(cfg.optim.lr == 0.002);
  CHECK(cfg.optim.kind == spmkd::OptimizerKind::kMomentum);
  CHECK(cfg.loss.alpha == 1.5);
  CHECK(cfg.loss.beta == 0.5);
  CHECK(cfg.loss.window == spmkd::SsimWindow::kGlobal);
  CHECK_FALSE(cfg.crwt_enabled);
  CHECK(cfg.data_path == "/tmp/ds");
  CHECK(cfg.out_dir == "/tmp/out");
  cfg.validate();

  spmkd::apply_override(cfg, "phase1.epochs=5");
  CHECK(cfg.phase1_epochs == 5);
  CHECK_THROWS_AS(spmkd::apply_override(cfg, "no_such_key=1"), spmkd::ConfigError);
  CHECK_THROWS_AS(spmkd::apply_override(cfg, "lr=fast"), spmkd::ConfigError);
  CHECK_THROWS_AS(spmkd::apply_override(cfg, "just-a-flag"), spmkd::ConfigError);

  testutil::write_file_bytes(path, "seed = 1\nnot a key value line\n");
  CHECK_THROWS_AS(spmkd::parse_config_file(path), spmkd::ParseError);
  testutil::write_file_bytes(path, "seed = 1\nmystery = 3\n");
  try {
    spmkd::parse_config_file(path);
    FAIL("expected ConfigError");
  } catch (const spmkd::ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(spmkd::parse_config_file(dir.file("absent.cfg")), spmkd::IoError);
}

TEST_CASE("config: canonical text reparses to the same hash") {
  TempDir dir("config_hash");
  spmkd::RunConfig cfg;
  cfg.seed = 11;
  cfg.width_mult = 0.375;
  cfg.loss.beta = 0.25;
  cfg.optim.kind = spmkd::OptimizerKind::kSgd;
  const auto h1 = cfg.hash();
  CHECK(h1 == cfg.hash());

  const std::string path = dir.file("canon.cfg");
  testutil::write_file_bytes(path, cfg.canonical());
  auto reparsed = spmkd::parse_config_file(path);
  CHECK(reparsed.hash() == h1);

  spmkd::apply_override(reparsed, "seed=12");
  CHECK(reparsed.hash() != h1);
}

TEST_CASE("config: model mapping scales widths and syncs the grid") {
  spmkd::RunConfig cfg;
  cfg.k = 5;
  cfg.f = 3;
  cfg.width_mult = 0.25;
  cfg.input_size = 64;
  auto m = cfg.to_model_config();
  CHECK(m.encoder.k == 5);
  CHECK(m.encoder.widths == std::vector<std::int64_t>{4, 8});
  CHECK(m.decoder.width_mult == 0.25);
  CHECK(m.decoder.grid == 16);
  CHECK(m.decoder.output_resolution == 16);
  m.validate();

  cfg.output_scale = 4;
  CHECK(cfg.to_model_config().decoder.output_resolution == 64);

  cfg.output_scale = 3;
  CHECK_THROWS_AS(cfg.validate(), spmkd::ConfigError);
  cfg.output_scale = 1;
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), spmkd::ConfigError);
  cfg.batch = 1;
  cfg.phase2_epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), spmkd::ConfigError);
}

// ===========================================================================
// metrics csv
// ===========================================================================

TEST_CASE("csv: deterministic formatting and roundtrip") {
  TempDir dir("csv_roundtrip");
  CHECK(spmkd::format_csv_value(12.0) == "12");
  CHECK(spmkd::format_csv_value(0.1234567891234) == "0.123456789");
  CHECK(spmkd::format_csv_value(-3.5e-7) == "-3.5e-07");

  const std::string path = dir.file("m.csv");
  {
    spmkd::CsvWriter w(path, {"epoch", "loss", "f_score"});
    w.row({1, 0.75, 0.5});
    w.row({2, 0.5000000001, 0.625});
    CHECK_THROWS_AS(w.row({3, 1.0}), spmkd::DimensionError);
  }
  auto table = spmkd::read_csv(path);
  CHECK(table.columns == std::vector<std::string>{"epoch", "loss", "f_score"});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[1][0] == 2.0);
  CHECK(table.rows[1][1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(table.column_index("loss") == 1);
  CHECK_THROWS_AS(table.column_index("nope"), spmkd::StateError);

  const std::string again = dir.file("m2.csv");
  {
    spmkd::CsvWriter w(again, {"epoch", "loss", "f_score"});
    w.row({1, 0.75, 0.5});
    w.row({2, 0.5000000001, 0.625});
  }
  auto bytes1 = testutil::read_file_bytes(path);
  auto bytes2 = testutil::read_file_bytes(again);
  CHECK(bytes1 == bytes2);

  testutil::write_file_bytes(path, "epoch,loss\n1,abc\n");
  CHECK_THROWS_AS(spmkd::read_csv(path), spmkd::ParseError);
  testutil::write_file_bytes(path, "epoch,loss\n1\n");
  CHECK_THROWS_AS(spmkd::read_csv(path), spmkd::ParseError);
  CHECK_THROWS_AS(spmkd::read_csv(dir.file("nope.csv")), spmkd::IoError);
}
