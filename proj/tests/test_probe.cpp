#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "probe/probe.hpp"
#include "test_support.hpp"

using spmkd::ProbeEval;
using spmkd::ProbeModel;
using spmkd::ProbeSet;
using spmkd::Rng;
using testutil::read_file_bytes;
using testutil::TempDir;

namespace {

// Three tight clusters around scaled one-hot corners: linearly separable.
ProbeSet separable_set(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  ProbeSet out;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<float> x(4, 0.0f);
      x[c] = 5.0f;
      for (auto& v : x) v += static_cast<float>(rng.uniform(-0.2, 0.2));
      out.features.push_back(std::move(x));
      out.labels.push_back(c);
    }
  }
  return out;
}

// Features and labels drawn independently: no signal to find.
ProbeSet noise_set(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  ProbeSet out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> x(16);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    out.features.push_back(std::move(x));
    out.labels.push_back(static_cast<int>(rng.uniform_int(0, 2)));
  }
  return out;
}

std::map<std::string, std::vector<float>> param_snapshot(const spmkd::ParamList<float>& params) {
  std::map<std::string, std::vector<float>> out;
  for (const auto& [name, t] : params) out[name] = t.values();
  return out;
}

}  // namespace

// ===========================================================================
// fitting
// ===========================================================================

TEST_CASE("separable clusters are fit to perfect accuracy") {
  auto data = separable_set(20, 3);
  auto probe = spmkd::fit_probe(data, 200, 0.5);
  CHECK(probe.dim == 4);
  CHECK(probe.classes[0] == std::string("supine"));

  auto eval = spmkd::evaluate_probe(probe, data);
  CHECK(eval.accuracy == 1.0);
  CHECK(eval.count == 60);
  // Perfect fit: the confusion matrix is diagonal with the class counts.
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) CHECK(eval.confusion[r][c] == (r == c ? 20 : 0));
  }
}

TEST_CASE("independent labels score at chance on held-out data") {
  auto train = noise_set(300, 10);
  auto probe = spmkd::fit_probe(train, 300, 0.5);
  auto eval = spmkd::evaluate_probe(probe, noise_set(300, 11));
  CHECK(eval.accuracy > 1.0 / 3.0 - 0.1);
  CHECK(eval.accuracy < 1.0 / 3.0 + 0.1);
}

TEST_CASE("degenerate single-class data is rejected") {
  ProbeSet data;
  for (int i = 0; i < 8; ++i) {
    data.features.push_back({static_cast<float>(i), 1.0f});
    data.labels.push_back(2);
  }
  CHECK_THROWS_WITH_AS(spmkd::fit_probe(data, 10, 0.5), doctest::Contains("single class"),
                       spmkd::StateError);
}

TEST_CASE("malformed probe sets are rejected") {
  ProbeSet empty;
  CHECK_THROWS_AS(spmkd::fit_probe(empty, 10, 0.5), spmkd::StateError);
  CHECK_THROWS_AS(spmkd::evaluate_probe(ProbeModel{}, empty), spmkd::StateError);

  ProbeSet ragged;
  ragged.features = {{1.0f, 2.0f}, {1.0f}};
  ragged.labels = {0, 1};
  CHECK_THROWS_AS(spmkd::fit_probe(ragged, 10, 0.5), spmkd::DimensionError);

  ProbeSet bad_label;
  bad_label.features = {{1.0f}, {2.0f}};
  bad_label.labels = {0, 3};
  CHECK_THROWS_AS(spmkd::fit_probe(bad_label, 10, 0.5), spmkd::StateError);

  auto data = separable_set(4, 1);
  CHECK_THROWS_AS(spmkd::fit_probe(data, 0, 0.5), spmkd::ConfigError);
  CHECK_THROWS_AS(spmkd::fit_probe(data, 10, 0.0), spmkd::ConfigError);
}

TEST_CASE("fitting is deterministic") {
  auto data = separable_set(10, 5);
  auto a = spmkd::fit_probe(data, 100, 0.5);
  auto b = spmkd::fit_probe(data, 100, 0.5);
  CHECK(a.weight == b.weight);
  CHECK(a.bias == b.bias);
}

// ===========================================================================
// feature extraction from the frozen model
// ===========================================================================

TEST_CASE("extraction: descriptor size, skipped degraded samples, frozen weights") {
  TempDir dir("probe_extract");
  spmkd::GeneratorConfig gen;
  gen.map_size = 64;
  gen.seed = 21;
  spmkd::generate_dataset(dir.file("data"), gen, 9);
  // Strip one sidecar: that sample must be skipped as unlabeled.
  std::filesystem::remove(dir.file("data/samples/000002.meta"));
  auto ds = spmkd::load_dataset(dir.file("data"));
  REQUIRE_FALSE(ds.samples[2].has_pose);

  spmkd::ModelConfig mc;
  mc.encoder.k = 2;
  mc.encoder.f = 3;
  mc.encoder.widths = {2, 4};
  mc.encoder.input_size = 16;
  mc.decoder.width_mult = 0.125;
  spmkd::SpmkdModel<float> model(mc.normalized(), 17);

  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) all.push_back(i);

  const auto before = param_snapshot(model.named_params());
  auto set = spmkd::extract_features(model, ds, all);
  CHECK(set.size() == 8);  // 9 samples, one unlabeled
  for (const auto& f : set.features) CHECK(f.size() == 12);  // k * 2f

  auto probe = spmkd::fit_probe(set, 50, 0.5);
  spmkd::evaluate_probe(probe, set);
  const auto after = param_snapshot(model.named_params());
  REQUIRE(before.size() == after.size());
  for (const auto& [name, vals] : before) {
    const auto& now = after.at(name);
    REQUIRE(now.size() == vals.size());
    CHECK(std::memcmp(now.data(), vals.data(), vals.size() * sizeof(float)) == 0);
  }

  // Extraction itself is deterministic.
  auto again = spmkd::extract_features(model, ds, all);
  CHECK(again.features == set.features);
  CHECK(again.labels == set.labels);

  // Maps that do not downsample onto the input grid are rejected.
  spmkd::PressureMap odd;
  odd.size = 24;
  odd.values.assign(24 * 24, 0.5f);
  CHECK_THROWS_AS(spmkd::extract_descriptor(model, odd), spmkd::ConfigError);
}

TEST_CASE("postures are recoverable from generated maps above chance") {
  TempDir dir("probe_chance");
  spmkd::GeneratorConfig gen;
  gen.map_size = 64;
  gen.seed = 31;
  gen.noise_sigma = 0.0;
  spmkd::generate_dataset(dir.file("data"), gen, 60);
  auto ds = spmkd::load_dataset(dir.file("data"));

  spmkd::ModelConfig mc;
  mc.encoder.k = 2;
  mc.encoder.f = 3;
  mc.encoder.widths = {2, 4};
  mc.encoder.input_size = 16;
  mc.decoder.width_mult = 0.125;
  spmkd::SpmkdModel<float> model(mc.normalized(), 17);

  auto train = spmkd::extract_features(model, ds, ds.train_indices());
  auto val = spmkd::extract_features(model, ds, ds.val_indices());
  auto probe = spmkd::fit_probe(train, 500, 0.5);

  // Even an untrained encoder projects the three posture layouts apart.
  CHECK(spmkd::evaluate_probe(probe, train).accuracy > 0.5);
  CHECK(spmkd::evaluate_probe(probe, val).accuracy > 0.4);
}

// ===========================================================================
// results CSV
// ===========================================================================

TEST_CASE("results rows append under one header") {
  TempDir dir("probe_csv");
  const auto path = dir.file("results.csv");

  ProbeEval eval;
  eval.count = 4;
  eval.accuracy = 0.75;
  eval.confusion = {{{2, 0, 0}, {1, 1, 0}, {0, 0, 0}}};
  spmkd::append_probe_results(path, "train", eval);

  ProbeEval shifted;
  shifted.count = 2;
  shifted.accuracy = 0.5;
  shifted.confusion = {{{1, 0, 0}, {0, 0, 1}, {0, 0, 0}}};
  spmkd::append_probe_results(path, "shifted", shifted);

  const std::string want =
      "tag,count,accuracy,c00,c01,c02,c10,c11,c12,c20,c21,c22\n"
      "train,4,0.75,2,0,0,1,1,0,0,0,0\n"
      "shifted,2,0.5,1,0,0,0,0,1,0,0,0\n";
  const auto got = read_file_bytes(path);
  CHECK(std::string(got.begin(), got.end()) == want);

  CHECK_THROWS_AS(spmkd::append_probe_results(path, "a,b", eval), spmkd::ConfigError);
}
