#include "train/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace spmkd {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > size) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what,
                       static_cast<long long>(pos));
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return data[pos++];
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string buf;
  buf.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(buf, ckpt.version);
  put_u32(buf, ckpt.phase);
  put_u32(buf, ckpt.epoch);
  put_u64(buf, ckpt.config_hash);
  put_u32(buf, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (std::size_t i = 0; i < ckpt.entries.size(); ++i) {
    const auto& e = ckpt.entries[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (ckpt.entries[j].name == e.name) {
        throw StateError("checkpoint: duplicate entry name '" + e.name + "'");
      }
    }
    const std::int64_t n = numel(e.shape);
    if (e.payload.size() != static_cast<std::size_t>(n) * dtype_size(e.dtype)) {
      throw StateError("checkpoint: entry '" + e.name + "' payload does not match its shape");
    }
    put_u32(buf, static_cast<std::uint32_t>(e.name.size()));
    buf.append(e.name);
    buf.push_back(static_cast<char>(e.dtype));
    put_u32(buf, static_cast<std::uint32_t>(e.shape.size()));
    for (std::int64_t d : e.shape) put_u64(buf, static_cast<std::uint64_t>(d));
    buf.append(reinterpret_cast<const char*>(e.payload.data()), e.payload.size());
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open '" + tmp + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.flush();
    if (!out) throw IoError("checkpoint: write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("checkpoint: rename to '" + path + "' failed: " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r{reinterpret_cast<const unsigned char*>(buf.data()), buf.size()};
  r.need(sizeof(kCheckpointMagic), "magic");
  if (std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw ParseError("checkpoint: bad magic", 0);
  }
  r.pos = sizeof(kCheckpointMagic);

  Checkpoint ckpt;
  ckpt.version = r.u32("version");
  if (ckpt.version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(ckpt.version),
                     static_cast<long long>(sizeof(kCheckpointMagic)));
  }
  ckpt.phase = r.u32("phase");
  ckpt.epoch = r.u32("epoch");
  ckpt.config_hash = r.u64("config hash");
  const std::uint32_t count = r.u32("entry count");

  ckpt.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::size_t name_at = r.pos;
    const std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > 4096) {
      throw ParseError("checkpoint: implausible name length " + std::to_string(name_len),
                       static_cast<long long>(name_at));
    }
    r.need(name_len, "name");
    e.name.assign(buf.data() + r.pos, name_len);
    r.pos += name_len;

    const std::uint8_t dtype_raw = r.u8("dtype");
    if (dtype_raw > 1) {
      throw ParseError("checkpoint: unknown dtype " + std::to_string(dtype_raw),
                       static_cast<long long>(r.pos - 1));
    }
    e.dtype = static_cast<Dtype>(dtype_raw);

    const std::size_t ndim_at = r.pos;
    const std::uint32_t ndim = r.u32("rank");
    if (ndim == 0 || ndim > 8) {
      throw ParseError("checkpoint: implausible rank " + std::to_string(ndim),
                       static_cast<long long>(ndim_at));
    }
    std::int64_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const std::size_t dim_at = r.pos;
      const std::int64_t dim = static_cast<std::int64_t>(r.u64("dimension"));
      if (dim <= 0 || dim > (std::int64_t(1) << 32)) {
        throw ParseError("checkpoint: bad dimension " + std::to_string(dim),
                         static_cast<long long>(dim_at));
      }
      e.shape.push_back(dim);
      n *= dim;
      if (n > (std::int64_t(1) << 40)) {
        throw ParseError("checkpoint: entry '" + e.name + "' implausibly large",
                         static_cast<long long>(dim_at));
      }
    }
    const std::size_t payload_len = static_cast<std::size_t>(n) * dtype_size(e.dtype);
    r.need(payload_len, ("payload of '" + e.name + "'").c_str());
    e.payload.assign(buf.data() + r.pos, buf.data() + r.pos + payload_len);
    r.pos += payload_len;

    if (ckpt.find(e.name)) {
      throw ParseError("checkpoint: duplicate entry name '" + e.name + "'",
                       static_cast<long long>(name_at));
    }
    ckpt.entries.push_back(std::move(e));
  }
  if (r.pos != r.size) {
    throw ParseError("checkpoint: trailing bytes after last entry", static_cast<long long>(r.pos));
  }
  return ckpt;
}

}  // namespace spmkd
