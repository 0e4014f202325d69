#pragma once

// Full pipeline: Encoder -> Fuser -> Decoder, plus the deterministic
// positional grid that feeds the fuser.

#include <cstdint>
#include <string>

#include "model/decoder.hpp"
#include "model/encoder.hpp"
#include "model/fuser.hpp"

namespace spmkd {

struct ModelConfig {
  EncoderConfig encoder;
  FuserConfig fuser;
  DecoderConfig decoder;

  void validate() const {
    encoder.validate();
    decoder.validate();
    if (decoder.grid != encoder.grid()) {
      throw ConfigError("model: decoder grid " + std::to_string(decoder.grid) +
                        " must equal encoder grid " + std::to_string(encoder.grid()));
    }
  }

  // Copy with the decoder grid synced to the encoder-derived value.
  ModelConfig normalized() const {
    ModelConfig c = *this;
    c.decoder.grid = c.encoder.grid();
    if (c.decoder.output_resolution != 4 * c.decoder.grid) c.decoder.output_resolution = c.decoder.grid;
    return c;
  }
};

template <typename T>
struct ModelOut {
  EncoderOut<T> enc;
  KeypointSet<T> keypoints;
  Tensor<T> reconstruction;  // (1, head_channels, out, out)
};

template <typename T>
class SpmkdModel {
 public:
  SpmkdModel(const ModelConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        encoder_(cfg.encoder, seed),
        fuser_(cfg.fuser, cfg.encoder.f, seed),
        decoder_(cfg.decoder, cfg.encoder.k, cfg.encoder.f, seed),
        coords_(make_positional_grid<T>(cfg.encoder.grid(), cfg.encoder.grid())) {
    cfg_.validate();
  }

  const ModelConfig& config() const { return cfg_; }
  const Encoder<T>& encoder() const { return encoder_; }
  const Fuser<T>& fuser() const { return fuser_; }
  Decoder<T>& decoder() { return decoder_; }
  const Decoder<T>& decoder() const { return decoder_; }
  const Tensor<T>& coords() const { return coords_; }

  ModelOut<T> forward(const Tensor<T>& x) const {
    auto enc = encoder_.forward(x);
    auto kp = fuser_.fuse(enc.heatmap, coords_, enc.features);
    auto recon = decoder_.forward(kp.descriptors);
    return {enc, kp, recon};
  }

  void swap_head(HeadMode mode, std::uint64_t seed) {
    decoder_.swap_head(mode, seed);
    cfg_.decoder.head = mode;  // keep the top-level config in sync
  }

  ParamList<T> named_params() const {
    ParamList<T> out = encoder_.named_params();
    for (auto& p : fuser_.named_params()) out.push_back(std::move(p));
    for (auto& p : decoder_.named_params()) out.push_back(std::move(p));
    return out;
  }

  ModelDesc describe() const {
    const std::int64_t g = cfg_.encoder.grid();
    ModelDesc out = encoder_.describe();
    for (auto& d : fuser_.describe(cfg_.encoder.k, g * g)) out.push_back(std::move(d));
    for (auto& d : decoder_.describe()) out.push_back(std::move(d));
    return out;
  }

 private:
  ModelConfig cfg_;
  Encoder<T> encoder_;
  Fuser<T> fuser_;
  Decoder<T> decoder_;
  Tensor<T> coords_;
};

}  // namespace spmkd
