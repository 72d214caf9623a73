#pragma once

#include <array>

#include "migate/gate.hpp"

namespace migate {

enum class Direction : int {
  left_to_right = 0,
  right_to_left = 1,
  top_to_bottom = 2,
  bottom_to_top = 3,
};
constexpr std::array<Direction, 4> kAllDirections = {
    Direction::left_to_right, Direction::right_to_left,
    Direction::top_to_bottom, Direction::bottom_to_top};

// One 4-directional IRNN layer: shared 1x1 input transition, one recurrent
// matrix per direction (identity at init), and a 1x1 mix that reduces the
// concatenated 4H hidden channels to C_out.
struct IRNNLayerParams {
  int in_channels = 0;
  int hidden = 0;
  int out_channels = 0;
  Tensor W_in;                  // {C_in, H}
  Tensor b_in;                  // {H}
  std::array<Tensor, 4> W_hh;   // each {H, H}
  Tensor W_mix;                 // {4H, C_out}
  Tensor b_mix;                 // {C_out}

  static IRNNLayerParams init(int in_channels, int hidden, int out_channels,
                              Rng& rng);
  size_t param_count() const;
};

struct IRNNLeaves {
  Var W_in, b_in, W_mix, b_mix;
  std::array<Var, 4> W_hh;
  static IRNNLeaves from(const IRNNLayerParams& p, bool trainable = true);
};

struct SPPConfig {
  std::vector<int> levels = {1, 2};  // grid subdivisions, max-pool per bin
};

// One directional sweep over x:{K,K,H} (x already holds the 1x1-convolved
// input-to-hidden values): h(cell) = max(W_hh^T h(prev) + x(cell), 0) with a
// zero hidden state at the boundary.
Var irnn_sweep(const Var& x, Direction dir, const Var& W_hh);

Var four_dir_layer(const Var& x, const IRNNLeaves& leaves);

// Two stacked four-direction layers; inverted dropout on each layer output
// when training. layer2 must map back to the input channel count.
Var stacked_irnn_pool(const Var& F, const IRNNLeaves& layer1,
                      const IRNNLeaves& layer2, double dropout_p,
                      bool training, Rng* dropout_rng);

// Multi-level max pooling; output vector of length D * sum(L^2).
Var spp_pool(const Var& F, const SPPConfig& cfg);

// Every output cell is the spatial mean vector.
Var global_avg_unpool(const Var& F);

struct ConvContextParams {
  int channels = 0;
  Tensor W1, b1, W2, b2;  // 3x3 same-padding convs, C -> C
  static ConvContextParams init(int channels, Rng& rng);
  size_t param_count() const;
};

struct ConvContextLeaves {
  Var W1, b1, W2, b2;
  static ConvContextLeaves from(const ConvContextParams& p,
                                bool trainable = true);
};

// Two 3x3 same-padding convolutions with ReLU; requires K >= 5.
Var stacked_conv_context(const Var& F, const ConvContextLeaves& leaves);

enum class ContextKind { irnn2, spp, global_avg, stacked_conv };
ContextKind context_kind_from_string(const std::string& s);
std::string to_string(ContextKind k);

}  // namespace migate
