#pragma once

#include "migate/encoder.hpp"
#include "migate/head.hpp"
#include "migate/spatial.hpp"

namespace migate {

struct ModelConfig {
  EncoderConfig encoder;
  FusionMode fusion = FusionMode::gated;
  int gate_embed = 0;  // d; 0 -> defaults to D
  ContextKind context = ContextKind::irnn2;
  int hidden = 64;         // IRNN hidden units H
  int inter_channels = 0;  // channels between the two IRNN layers; 0 -> H
  SPPConfig spp;
  double dropout_p = 0.5;
  int head_embed = 64;  // E

  void finalize();          // fills defaults, validates geometry
  int head_in_dim() const;  // flattened residual size feeding the FC layer
};

// All trainable state. Parameter enumeration order is fixed; checkpoints,
// the optimizer, and gradient accumulation all key off it.
struct ModelParams {
  ModelConfig cfg;
  EncoderParams enc_a;
  EncoderParams enc_b;  // present only when streams are not shared
  MIGateParams gate;
  IRNNLayerParams irnn1, irnn2;
  ConvContextParams conv_ctx;
  HeadParams head;

  static ModelParams init(const ModelConfig& cfg, uint64_t seed);
  std::vector<std::pair<std::string, Tensor*>> named_params();
  std::vector<std::pair<std::string, const Tensor*>> named_params() const;
  size_t param_count() const;
  std::string summary() const;  // per-block parameter counts for the CLI
};

struct ModelLeaves {
  EncoderLeaves enc_a, enc_b;
  MIGateLeaves gate;
  IRNNLeaves irnn1, irnn2;
  ConvContextLeaves conv_ctx;
  HeadLeaves head;

  static ModelLeaves from(const ModelParams& p, bool trainable = true);
  // same order as ModelParams::named_params
  std::vector<std::pair<std::string, Var>> named_leaves(
      const ModelConfig& cfg) const;
};

// Builds the pair branch on top of two activation maps:
// gate fusion -> context model -> residual embeddings -> cosine.
struct PairOutputs {
  Var similarity;  // scalar
  Var emb_a, emb_b;
};
PairOutputs pair_graph(const Var& act_a, const Var& act_b,
                       const ModelConfig& cfg, const ModelLeaves& leaves,
                       bool training, Rng* dropout_rng);

// Full inference composition for one image pair (dropout off).
double pair_similarity(const Tensor& image_a, const Tensor& image_b,
                       const ModelParams& params,
                       const std::vector<double>& channel_mean);

// Checkpoint file: "MICK" magic, version, precision tag, then the fixed
// sections (encoder, gate, irnn1, irnn2, head, optimizer), each
// length-prefixed. The encoder section also carries the dataset channel
// means; the optimizer section holds SGD velocities (may be empty).
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::vector<Tensor>& optimizer_state,
                     const std::vector<double>& channel_mean);
void load_checkpoint(const std::string& path, ModelParams& params,
                     std::vector<Tensor>& optimizer_state,
                     std::vector<double>& channel_mean);

}  // namespace migate
