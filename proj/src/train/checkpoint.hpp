#pragma once

// Binary weight snapshots. Layout (all integers little-endian):
//
//   "SPMKDCKP"        8-byte magic
//   u32 version       currently 1
//   u32 phase         training phase the snapshot was taken in (0 = none)
//   u32 epoch         epochs completed when the snapshot was taken
//   u64 config_hash   hash of the canonical run config
//   u32 entry_count
//   entry*            u32 name_len, name bytes, u8 dtype (0=f32, 1=f64),
//                     u32 ndim, i64 dims[ndim], raw scalar payload
//
// Writes go to "<path>.tmp" and are renamed into place, so a crash never
// leaves a half-written checkpoint under the final name.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/tensor.hpp"
#include "model/layers.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are memcpy'd and assume a little-endian host");

namespace spmkd {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'M', 'K', 'D', 'C', 'K', 'P'};

enum class Dtype : std::uint8_t {
  kF32 = 0,
  kF64 = 1,
};

inline std::size_t dtype_size(Dtype d) { return d == Dtype::kF32 ? 4 : 8; }
inline const char* dtype_name(Dtype d) { return d == Dtype::kF32 ? "f32" : "f64"; }

template <typename T>
constexpr Dtype dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Dtype::kF32 : Dtype::kF64;
}

struct CheckpointEntry {
  std::string name;
  Dtype dtype = Dtype::kF32;
  Shape shape;
  std::vector<unsigned char> payload;  // raw little-endian scalars, row-major
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint32_t phase = 0;
  std::uint32_t epoch = 0;
  std::uint64_t config_hash = 0;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const {
    for (const auto& e : entries) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

template <typename T>
CheckpointEntry make_entry(const std::string& name, const Tensor<T>& t) {
  CheckpointEntry e;
  e.name = name;
  e.dtype = dtype_of<T>();
  e.shape = t.shape();
  e.payload.resize(t.values().size() * sizeof(T));
  if (!e.payload.empty()) std::memcpy(e.payload.data(), t.values().data(), e.payload.size());
  return e;
}

template <typename T>
std::vector<T> entry_values(const CheckpointEntry& e) {
  if (e.dtype != dtype_of<T>()) {
    throw StateError("checkpoint entry '" + e.name + "' holds " + dtype_name(e.dtype) +
                     " data, requested a different scalar type");
  }
  std::vector<T> out(e.payload.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), e.payload.data(), e.payload.size());
  return out;
}

template <typename T>
Checkpoint snapshot_params(const ParamList<T>& params, std::uint32_t phase, std::uint32_t epoch,
                           std::uint64_t config_hash) {
  Checkpoint ckpt;
  ckpt.phase = phase;
  ckpt.epoch = epoch;
  ckpt.config_hash = config_hash;
  ckpt.entries.reserve(params.size());
  for (const auto& [name, tensor] : params) {
    if (ckpt.find(name)) throw StateError("checkpoint: duplicate parameter name '" + name + "'");
    ckpt.entries.push_back(make_entry(name, tensor));
  }
  return ckpt;
}

namespace detail {

inline bool has_prefix(const std::string& s, const std::string& prefix) {
  return !prefix.empty() && s.rfind(prefix, 0) == 0;
}

}  // namespace detail

// Copies checkpoint payloads into the matching parameters byte for byte.
// Parameters and entries whose names start with `skip_prefix` are excluded on
// both sides; everything else must pair up exactly (same name, shape, dtype)
// or the whole restore is rejected with the full list of offenders.
template <typename T>
void restore_params(const Checkpoint& ckpt, const ParamList<T>& params,
                    const std::string& skip_prefix = "") {
  std::vector<std::string> problems;
  std::vector<const CheckpointEntry*> matched;
  for (const auto& [name, tensor] : params) {
    if (detail::has_prefix(name, skip_prefix)) continue;
    const CheckpointEntry* e = ckpt.find(name);
    if (!e) {
      problems.push_back(name + ": missing from checkpoint");
      continue;
    }
    matched.push_back(e);
    if (e->dtype != dtype_of<T>()) {
      problems.push_back(name + ": dtype " + dtype_name(e->dtype) + " does not match model");
      continue;
    }
    if (e->shape != tensor.shape()) {
      problems.push_back(name + ": shape " + shape_str(e->shape) + " vs model " +
                         shape_str(tensor.shape()));
    }
  }
  for (const auto& e : ckpt.entries) {
    if (detail::has_prefix(e.name, skip_prefix)) continue;
    bool used = false;
    for (const auto* m : matched) used = used || m == &e;
    if (!used) problems.push_back(e.name + ": not a model parameter");
  }
  if (!problems.empty()) {
    std::string msg = "weight transfer failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw TransferError(msg);
  }
  for (const auto& [name, tensor] : params) {
    if (detail::has_prefix(name, skip_prefix)) continue;
    const CheckpointEntry* e = ckpt.find(name);
    auto& dst = tensor.values_mutable();
    std::memcpy(dst.data(), e->payload.data(), e->payload.size());
  }
}

}  // namespace spmkd
