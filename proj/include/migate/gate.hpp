#pragma once

#include "migate/autograd.hpp"

namespace migate {

// K x K x D feature grid; square spatial extent enforced at construction.
struct ActivationMap {
  Tensor values;  // {K, K, D}

  ActivationMap() = default;
  explicit ActivationMap(Tensor t);

  int extent() const { return values.dim(0); }
  int channels() const { return values.dim(2); }
};

// validates that a graph var carries a square K x K x D map
void require_map(const Var& v, const char* who);

enum class FusionMode { linear, gated, concat };

FusionMode fusion_mode_from_string(const std::string& s);
std::string to_string(FusionMode m);

// Parameters of the multiplicative integration gate. `concat` is the
// ablation that replaces the Hadamard product with channel concatenation
// (P then maps 2d -> D).
struct MIGateParams {
  FusionMode mode = FusionMode::gated;
  int input_channels = 0;  // D
  int embed_dim = 0;       // d
  Tensor U;                // {D, d}
  Tensor V;                // {D, d}
  Tensor b_a;              // {d}
  Tensor b_b;              // {d}
  Tensor P;                // {d, D}, or {2d, D} in concat mode
  Tensor b;                // {D}

  static MIGateParams init(int channels, int embed_dim, FusionMode mode,
                           Rng& rng);
  size_t param_count() const;
};

// graph leaves for one forward; shared-parameter reuse is the caller's call
struct MIGateLeaves {
  Var U, V, b_a, b_b, P, b;
  static MIGateLeaves from(const MIGateParams& p, bool trainable = true);
};

// F(i,j,:) per fusion mode:
//   linear:  P^T((U^T gA + b_a) . (V^T gB + b_b)) + b
//   gated:   P^T(sigmoid(U^T gA + b_a) . sigmoid(V^T gB + b_b)) + b
//   concat:  P^T[sigmoid(U^T gA + b_a); sigmoid(V^T gB + b_b)] + b
Var mi_forward(const Var& gA, const Var& gB, const MIGateLeaves& leaves,
               FusionMode mode);

ActivationMap mi_forward(const ActivationMap& gA, const ActivationMap& gB,
                         const MIGateParams& params);

// Closed-form input gradients of the linear gate, valid only for
// b_a = b_b = 0 and P = I (d = D):
//   dL/dgA(i,j,:) = U diag(V^T gB(i,j,:)) dL/dF(i,j,:)   (and symmetrically)
struct MIGateInputGrads {
  Tensor dgA;
  Tensor dgB;
};
MIGateInputGrads mi_backward_closed_form(const ActivationMap& gA,
                                         const ActivationMap& gB,
                                         const MIGateParams& params,
                                         const Tensor& upstream);

}  // namespace migate
