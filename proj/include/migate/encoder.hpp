#pragma once

#include "migate/gate.hpp"

namespace migate {

struct ConvLayerSpec {
  int kernel = 3;
  int stride = 1;
  int channels = 0;
  bool relu = true;
};

// Small trainable conv encoder standing in for a truncated pretrained
// backbone. Geometry is validated up front: the stack must map the input to
// exactly K x K x D.
struct EncoderConfig {
  int in_height = 64, in_width = 64, in_channels = 3;
  std::vector<ConvLayerSpec> layers;
  int out_extent = 0;    // K
  int out_channels = 0;  // D
  bool shared_streams = true;

  static EncoderConfig desk_default();
  void validate() const;  // throws DimensionError on geometry mismatch
};

struct EncoderParams {
  std::vector<Tensor> W;  // per layer {k, k, Cin, Cout}
  std::vector<Tensor> b;  // per layer {Cout}
  static EncoderParams init(const EncoderConfig& cfg, Rng& rng);
  size_t param_count() const;
};

struct EncoderLeaves {
  std::vector<Var> W, b;
  static EncoderLeaves from(const EncoderParams& p, bool trainable = true);
};

Var encode(const Var& image, const EncoderConfig& cfg,
           const EncoderLeaves& leaves);
ActivationMap encode(const Tensor& image, const EncoderConfig& cfg,
                     const EncoderParams& params);

// [0,1] image minus per-channel dataset mean
Tensor normalize_image(const Tensor& image01,
                       const std::vector<double>& channel_mean);

// "MIAM" binary activation-map format: magic, u16 version, u32 K, u32 D,
// u8 precision tag (bytes per value), row-major little-endian payload.
void save_activation_map(const ActivationMap& m, const std::string& path);
ActivationMap load_activation_map(const std::string& path);

}  // namespace migate
