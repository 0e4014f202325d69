#include "train/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "core/rng.hpp"

namespace spmkd {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
  return n;
}

double parse_float(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::string fmt_float(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "seed") cfg.seed = parse_int(key, value);
  else if (key == "k") cfg.k = parse_int(key, value);
  else if (key == "f") cfg.f = parse_int(key, value);
  else if (key == "width_mult") cfg.width_mult = parse_float(key, value);
  else if (key == "input_size") cfg.input_size = parse_int(key, value);
  else if (key == "output_scale") cfg.output_scale = parse_int(key, value);
  else if (key == "phase1.epochs") cfg.phase1_epochs = parse_int(key, value);
  else if (key == "phase2.epochs") cfg.phase2_epochs = parse_int(key, value);
  else if (key == "batch") cfg.batch = parse_int(key, value);
  else if (key == "lr") cfg.optim.lr = parse_float(key, value);
  else if (key == "optimizer") {
    if (value == "sgd") cfg.optim.kind = OptimizerKind::kSgd;
    else if (value == "momentum") cfg.optim.kind = OptimizerKind::kMomentum;
    else if (value == "adam") cfg.optim.kind = OptimizerKind::kAdam;
    else throw ConfigError("config: optimizer must be sgd|momentum|adam, got '" + value + "'");
  } else if (key == "alpha") cfg.loss.alpha = parse_float(key, value);
  else if (key == "beta") cfg.loss.beta = parse_float(key, value);
  else if (key == "ssim.window") {
    if (value == "uniform") cfg.loss.window = SsimWindow::kUniform;
    else if (value == "gaussian") cfg.loss.window = SsimWindow::kGaussian;
    else if (value == "global") cfg.loss.window = SsimWindow::kGlobal;
    else throw ConfigError("config: ssim.window must be uniform|gaussian|global, got '" + value + "'");
  } else if (key == "ssim.window_size") cfg.loss.window_size = parse_int(key, value);
  else if (key == "crwt.enabled") cfg.crwt_enabled = parse_bool(key, value);
  else if (key == "probe.iters") cfg.probe_iters = parse_int(key, value);
  else if (key == "probe.lr") cfg.probe_lr = parse_float(key, value);
  else if (key == "data.path") cfg.data_path = value;
  else if (key == "out.dir") cfg.out_dir = value;
  else throw ConfigError("config: unknown key '" + key + "'");
}

const char* window_name(SsimWindow w) {
  switch (w) {
    case SsimWindow::kUniform: return "uniform";
    case SsimWindow::kGaussian: return "gaussian";
    case SsimWindow::kGlobal: return "global";
  }
  return "?";
}

}  // namespace

void RunConfig::validate() const {
  if (phase1_epochs < 1 || phase2_epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (batch < 1) throw ConfigError("config: batch must be >= 1");
  if (output_scale != 1 && output_scale != 4) throw ConfigError("config: output_scale must be 1 or 4");
  if (probe_iters < 1) throw ConfigError("config: probe.iters must be >= 1");
  if (probe_lr <= 0) throw ConfigError("config: probe.lr must be positive");
  optim.validate();
  loss.validate();
  to_model_config().validate();
}

ModelConfig RunConfig::to_model_config() const {
  ModelConfig m;
  m.encoder.k = k;
  m.encoder.f = f;
  m.encoder.input_size = input_size;
  m.decoder.width_mult = width_mult;
  for (auto& w : m.encoder.widths) {
    const auto s = static_cast<std::int64_t>(static_cast<double>(w) * width_mult + 0.5);
    w = s < 1 ? 1 : s;
  }
  m = m.normalized();
  m.decoder.output_resolution = m.decoder.grid * output_scale;
  return m;
}

std::string RunConfig::canonical() const {
  std::string s;
  s += "seed=" + std::to_string(seed) + "\n";
  s += "k=" + std::to_string(k) + "\n";
  s += "f=" + std::to_string(f) + "\n";
  s += "width_mult=" + fmt_float(width_mult) + "\n";
  s += "input_size=" + std::to_string(input_size) + "\n";
  s += "output_scale=" + std::to_string(output_scale) + "\n";
  s += "phase1.epochs=" + std::to_string(phase1_epochs) + "\n";
  s += "phase2.epochs=" + std::to_string(phase2_epochs) + "\n";
  s += "batch=" + std::to_string(batch) + "\n";
  s += "lr=" + fmt_float(optim.lr) + "\n";
  s += std::string("optimizer=") + optimizer_name(optim.kind) + "\n";
  s += "alpha=" + fmt_float(loss.alpha) + "\n";
  s += "beta=" + fmt_float(loss.beta) + "\n";
  s += std::string("ssim.window=") + window_name(loss.window) + "\n";
  s += "ssim.window_size=" + std::to_string(loss.window_size) + "\n";
  s += std::string("crwt.enabled=") + (crwt_enabled ? "true" : "false") + "\n";
  s += "probe.iters=" + std::to_string(probe_iters) + "\n";
  s += "probe.lr=" + fmt_float(probe_lr) + "\n";
  s += "data.path=" + data_path + "\n";
  s += "out.dir=" + out_dir + "\n";
  return s;
}

std::uint64_t RunConfig::hash() const {
  const std::string c = canonical();
  return fnv1a64(c.data(), c.size());
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  RunConfig cfg;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash_at = line.find('#');
    if (hash_at != std::string::npos) line.erase(hash_at);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config: expected key=value in '" + line + "'", line_no);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("config: empty key", line_no);
    try {
      set_key(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
  }
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: override '" + assignment + "' is not key=value");
  }
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace spmkd
