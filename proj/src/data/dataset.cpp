#include "data/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

namespace spmkd {

namespace {

namespace fs = std::filesystem;

std::string fmt_float(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string pad6(std::int64_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
  return buf;
}

std::string generator_canonical(const GeneratorConfig& cfg) {
  std::string s;
  s += "map_size=" + std::to_string(cfg.map_size) + "\n";
  s += "seed=" + std::to_string(cfg.seed) + "\n";
  s += "noise_sigma=" + fmt_float(cfg.noise_sigma) + "\n";
  s += "kernel_sigma=" + fmt_float(cfg.kernel_sigma) + "\n";
  s += "jitter=" + fmt_float(cfg.jitter) + "\n";
  s += "body_weight=" + fmt_float(cfg.body_weight) + "\n";
  return s;
}

// Shared key=value reader for manifests and sidecars. Returns pairs in file
// order; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("dataset: cannot open '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash_at = line.find('#');
    if (hash_at != std::string::npos) line.erase(hash_at);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    const std::size_t eq = line.find('=', start);
    if (eq == std::string::npos) {
      throw ParseError("dataset: expected key=value in '" + path + "'", line_no);
    }
    out.emplace_back(line.substr(start, eq - start), line.substr(eq + 1));
  }
  return out;
}

double to_float(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ParseError("dataset: key '" + key + "' expects a number, got '" + v + "'", 0);
  }
  return x;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ParseError("dataset: key '" + key + "' expects an integer, got '" + v + "'", 0);
  }
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ParseError("dataset: key '" + key + "' expects an unsigned integer, got '" + v + "'", 0);
  }
  return x;
}

}  // namespace

std::vector<std::size_t> Dataset::train_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (manifest.split[i] == 't') out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dataset::val_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (manifest.split[i] == 'v') out.push_back(i);
  }
  return out;
}

std::string sample_png_path(const std::string& dir, std::int64_t index) {
  return dir + "/samples/" + pad6(index) + ".png";
}

std::string sample_meta_path(const std::string& dir, std::int64_t index) {
  return dir + "/samples/" + pad6(index) + ".meta";
}

std::uint64_t generator_config_hash(const GeneratorConfig& cfg) {
  const std::string c = generator_canonical(cfg);
  return fnv1a64(c.data(), c.size());
}

void save_sample(const std::string& dir, std::int64_t index, const SyntheticSample& sample) {
  write_png_gray16(sample_png_path(dir, index), quantize_map(sample.map));

  const std::string meta_path = sample_meta_path(dir, index);
  const std::string tmp = meta_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("dataset: cannot open '" + tmp + "' for writing");
    out << "seed=" << sample.seed << "\n";
    out << "posture=" << posture_name(sample.pose.posture) << "\n";
    for (int j = 0; j < kJointCount; ++j) {
      out << "joint." << kJointNames[j] << "=" << fmt_float(sample.pose.joints[j][0]) << ","
          << fmt_float(sample.pose.joints[j][1]) << "\n";
    }
    if (!out) throw IoError("dataset: write to '" + tmp + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, meta_path, ec);
  if (ec) throw IoError("dataset: rename to '" + meta_path + "' failed: " + ec.message());
}

SyntheticSample load_sample(const std::string& dir, std::int64_t index) {
  const std::string png_path = sample_png_path(dir, index);
  validate_png_file(png_path);
  SyntheticSample sample;
  sample.map = dequantize_map(read_png_gray16(png_path));

  const std::string meta_path = sample_meta_path(dir, index);
  if (!fs::exists(meta_path)) {
    sample.has_pose = false;
    return sample;
  }
  for (const auto& [key, value] : read_kv_file(meta_path)) {
    if (key == "seed") {
      sample.seed = to_u64(key, value);
    } else if (key == "posture") {
      sample.pose.posture = posture_from_name(value);
    } else if (key.rfind("joint.", 0) == 0) {
      const std::string joint = key.substr(6);
      int idx = -1;
      for (int j = 0; j < kJointCount; ++j) {
        if (joint == kJointNames[j]) idx = j;
      }
      if (idx < 0) throw ParseError("dataset: unknown joint '" + joint + "' in " + meta_path, 0);
      const std::size_t comma = value.find(',');
      if (comma == std::string::npos) {
        throw ParseError("dataset: joint '" + joint + "' expects x,y in " + meta_path, 0);
      }
      sample.pose.joints[idx][0] = to_float(key, value.substr(0, comma));
      sample.pose.joints[idx][1] = to_float(key, value.substr(comma + 1));
    } else {
      throw ParseError("dataset: unknown sidecar key '" + key + "' in " + meta_path, 0);
    }
  }
  sample.has_pose = true;
  return sample;
}

DatasetManifest generate_dataset(const std::string& dir, const GeneratorConfig& cfg,
                                 std::int64_t count) {
  cfg.validate();
  if (count < 1) throw ConfigError("dataset: count must be >= 1");
  fs::create_directories(dir + "/samples");

  DatasetManifest manifest;
  manifest.count = count;
  manifest.gen = cfg;
  manifest.config_hash = generator_config_hash(cfg);
  manifest.split.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    save_sample(dir, i, generate_sample(static_cast<std::uint64_t>(i), cfg));
    manifest.split.push_back(i % 5 == 4 ? 'v' : 't');
  }

  const std::string manifest_path = dir + "/manifest.txt";
  const std::string tmp = manifest_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("dataset: cannot open '" + tmp + "' for writing");
    out << "count=" << manifest.count << "\n";
    out << "split=" << manifest.split << "\n";
    out << "config_hash=" << manifest.config_hash << "\n";
    out << "gen.map_size=" << cfg.map_size << "\n";
    out << "gen.seed=" << cfg.seed << "\n";
    out << "gen.noise_sigma=" << fmt_float(cfg.noise_sigma) << "\n";
    out << "gen.kernel_sigma=" << fmt_float(cfg.kernel_sigma) << "\n";
    out << "gen.jitter=" << fmt_float(cfg.jitter) << "\n";
    out << "gen.body_weight=" << fmt_float(cfg.body_weight) << "\n";
    if (!out) throw IoError("dataset: write to '" + tmp + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, manifest_path, ec);
  if (ec) throw IoError("dataset: rename to '" + manifest_path + "' failed: " + ec.message());
  return manifest;
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.root = dir;
  bool have_count = false;
  for (const auto& [key, value] : read_kv_file(dir + "/manifest.txt")) {
    if (key == "count") {
      ds.manifest.count = to_int(key, value);
      have_count = true;
    } else if (key == "split") ds.manifest.split = value;
    else if (key == "config_hash") ds.manifest.config_hash = to_u64(key, value);
    else if (key == "gen.map_size") ds.manifest.gen.map_size = to_int(key, value);
    else if (key == "gen.seed") ds.manifest.gen.seed = to_u64(key, value);
    else if (key == "gen.noise_sigma") ds.manifest.gen.noise_sigma = to_float(key, value);
    else if (key == "gen.kernel_sigma") ds.manifest.gen.kernel_sigma = to_float(key, value);
    else if (key == "gen.jitter") ds.manifest.gen.jitter = to_float(key, value);
    else if (key == "gen.body_weight") ds.manifest.gen.body_weight = to_float(key, value);
    else throw ParseError("dataset: unknown manifest key '" + key + "'", 0);
  }
  if (!have_count || ds.manifest.count < 1) {
    throw ParseError("dataset: manifest missing a positive count", 0);
  }
  if (ds.manifest.split.size() != static_cast<std::size_t>(ds.manifest.count)) {
    throw ParseError("dataset: split string length does not match count", 0);
  }
  for (char c : ds.manifest.split) {
    if (c != 't' && c != 'v') throw ParseError("dataset: split must be 't'/'v' characters", 0);
  }
  const std::uint64_t expect = generator_config_hash(ds.manifest.gen);
  if (ds.manifest.config_hash != expect) {
    throw StateError("dataset: manifest config_hash does not match the stored generator config");
  }
  ds.samples.reserve(static_cast<std::size_t>(ds.manifest.count));
  for (std::int64_t i = 0; i < ds.manifest.count; ++i) {
    ds.samples.push_back(load_sample(dir, i));
  }
  return ds;
}

}  // namespace spmkd
