#include "migate/gate.hpp"

#include <cmath>

namespace migate {

ActivationMap::ActivationMap(Tensor t) : values(std::move(t)) {
  if (values.rank() != 3)
    throw DimensionError("activation map must be K x K x D, got " +
                         values.shape_str());
  if (values.dim(0) != values.dim(1))
    throw DimensionError("activation map must have square spatial extent, got " +
                         values.shape_str());
  if (values.dim(2) <= 0) throw DimensionError("activation map needs D > 0");
}

void require_map(const Var& v, const char* who) {
  if (v->value.rank() != 3 || v->value.dim(0) != v->value.dim(1))
    throw DimensionError(std::string(who) + ": expected square K x K x D map, got " +
                         v->value.shape_str());
}

FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "linear") return FusionMode::linear;
  if (s == "gated") return FusionMode::gated;
  if (s == "concat") return FusionMode::concat;
  throw DimensionError("unknown fusion mode '" + s + "'");
}

std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::linear: return "linear";
    case FusionMode::gated: return "gated";
    case FusionMode::concat: return "concat";
  }
  return "?";
}

namespace {
Tensor glorot(int rows, int cols, Rng& rng) {
  Tensor t({rows, cols});
  double bound = std::sqrt(6.0 / (rows + cols));
  double* p = t.mutable_data();
  for (size_t i = 0; i < t.size(); ++i) p[i] = rng.uniform(-bound, bound);
  t.quantize();
  return t;
}
}  // namespace

MIGateParams MIGateParams::init(int channels, int embed_dim, FusionMode mode,
                                Rng& rng) {
  if (channels <= 0 || embed_dim < 1)
    throw DimensionError("gate dims must satisfy D > 0, d >= 1");
  MIGateParams p;
  p.mode = mode;
  p.input_channels = channels;
  p.embed_dim = embed_dim;
  p.U = glorot(channels, embed_dim, rng);
  p.V = glorot(channels, embed_dim, rng);
  p.b_a = Tensor({embed_dim});
  p.b_b = Tensor({embed_dim});
  int joint = mode == FusionMode::concat ? 2 * embed_dim : embed_dim;
  p.P = glorot(joint, channels, rng);
  p.b = Tensor({channels});
  return p;
}

size_t MIGateParams::param_count() const {
  return U.size() + V.size() + b_a.size() + b_b.size() + P.size() + b.size();
}

MIGateLeaves MIGateLeaves::from(const MIGateParams& p, bool trainable) {
  auto wrap = [trainable](const Tensor& t) {
    return trainable ? leaf(t) : constant(t);
  };
  return {wrap(p.U), wrap(p.V), wrap(p.b_a), wrap(p.b_b), wrap(p.P), wrap(p.b)};
}

Var mi_forward(const Var& gA, const Var& gB, const MIGateLeaves& leaves,
               FusionMode mode) {
  require_map(gA, "mi_forward");
  require_map(gB, "mi_forward");
  require_same_shape(gA->value, gB->value, "mi_forward");
  if (gA->value.dim(2) != leaves.U->value.dim(0))
    throw DimensionError("mi_forward: map channels " +
                         std::to_string(gA->value.dim(2)) + " vs gate D " +
                         std::to_string(leaves.U->value.dim(0)));
  using namespace ops;
  Var ea = map_affine(gA, leaves.U, leaves.b_a);
  Var eb = map_affine(gB, leaves.V, leaves.b_b);
  Var joint;
  switch (mode) {
    case FusionMode::linear:
      joint = hadamard(ea, eb);
      break;
    case FusionMode::gated:
      joint = hadamard(sigmoid(ea), sigmoid(eb));
      break;
    case FusionMode::concat:
      joint = concat_channels({sigmoid(ea), sigmoid(eb)});
      break;
  }
  return map_affine(joint, leaves.P, leaves.b);
}

ActivationMap mi_forward(const ActivationMap& gA, const ActivationMap& gB,
                         const MIGateParams& params) {
  auto leaves = MIGateLeaves::from(params, false);
  Var out = mi_forward(constant(gA.values.clone()), constant(gB.values.clone()),
                       leaves, params.mode);
  out->value.check_finite("mi_forward");
  return ActivationMap(out->value);
}

MIGateInputGrads mi_backward_closed_form(const ActivationMap& gA,
                                         const ActivationMap& gB,
                                         const MIGateParams& params,
                                         const Tensor& upstream) {
  if (params.mode != FusionMode::linear)
    throw DimensionError("mi_backward_closed_form requires linear mode");
  for (size_t i = 0; i < params.b_a.size(); ++i)
    if (params.b_a[i] != 0.0 || params.b_b[i] != 0.0)
      throw DimensionError("mi_backward_closed_form requires zero embedding biases");
  int D = params.input_channels, d = params.embed_dim;
  if (d != D)
    throw DimensionError("mi_backward_closed_form requires P = I (d = D)");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < D; ++j)
      if (params.P[static_cast<size_t>(i) * D + j] != (i == j ? 1.0 : 0.0))
        throw DimensionError("mi_backward_closed_form requires P = I");
  require_same_shape(gA.values, gB.values, "mi_backward_closed_form");
  require_same_shape(upstream, gA.values, "mi_backward_closed_form");

  int K = gA.extent();
  MIGateInputGrads out{Tensor(gA.values.shape()), Tensor(gB.values.shape())};
  double* da = out.dgA.mutable_data();
  double* db = out.dgB.mutable_data();
  const double* av = gA.values.data();
  const double* bv = gB.values.data();
  const double* gv = upstream.data();
  const double* Uv = params.U.data();
  const double* Vv = params.V.data();
  std::vector<double> u(d), v(d);
  size_t cells = static_cast<size_t>(K) * K;
  for (size_t cell = 0; cell < cells; ++cell) {
    const double* a = av + cell * D;
    const double* b = bv + cell * D;
    const double* g = gv + cell * D;
    // u = U^T a, v = V^T b
    for (int k = 0; k < d; ++k) u[k] = v[k] = 0.0;
    for (int i = 0; i < D; ++i) {
      const double* urow = Uv + static_cast<size_t>(i) * d;
      const double* vrow = Vv + static_cast<size_t>(i) * d;
      for (int k = 0; k < d; ++k) {
        u[k] += urow[k] * a[i];
        v[k] += vrow[k] * b[i];
      }
    }
    // dgA = U (v . g), dgB = V (u . g)   [with P = I, d = D]
    for (int i = 0; i < D; ++i) {
      const double* urow = Uv + static_cast<size_t>(i) * d;
      const double* vrow = Vv + static_cast<size_t>(i) * d;
      double sa = 0.0, sb = 0.0;
      for (int k = 0; k < d; ++k) {
        sa += urow[k] * v[k] * g[k];
        sb += vrow[k] * u[k] * g[k];
      }
      da[cell * D + i] = sa;
      db[cell * D + i] = sb;
    }
  }
  return out;
}

}  // namespace migate
