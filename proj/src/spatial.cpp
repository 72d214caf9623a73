#include "migate/spatial.hpp"

#include <cmath>

namespace migate {

namespace {

Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  double* p = t.mutable_data();
  for (size_t i = 0; i < t.size(); ++i) p[i] = rng.uniform(-bound, bound);
  t.quantize();
  return t;
}

Tensor identity_matrix(int n) {
  Tensor t({n, n});
  double* p = t.mutable_data();
  for (int i = 0; i < n; ++i) p[static_cast<size_t>(i) * n + i] = 1.0;
  return t;
}

// cell visited at (lane, step) of a sweep; prev is the cell at step - 1
inline void sweep_cell(Direction dir, int K, int lane, int step, int& i, int& j) {
  switch (dir) {
    case Direction::left_to_right: i = lane; j = step; break;
    case Direction::right_to_left: i = lane; j = K - 1 - step; break;
    case Direction::top_to_bottom: i = step; j = lane; break;
    case Direction::bottom_to_top: i = K - 1 - step; j = lane; break;
  }
}

}  // namespace

IRNNLayerParams IRNNLayerParams::init(int in_channels, int hidden,
                                      int out_channels, Rng& rng) {
  if (in_channels <= 0 || hidden <= 0 || out_channels <= 0)
    throw DimensionError("IRNN layer dims must be positive");
  IRNNLayerParams p;
  p.in_channels = in_channels;
  p.hidden = hidden;
  p.out_channels = out_channels;
  p.W_in = glorot({in_channels, hidden}, in_channels, hidden, rng);
  p.b_in = Tensor({hidden});
  for (auto& w : p.W_hh) w = identity_matrix(hidden);
  p.W_mix = glorot({4 * hidden, out_channels}, 4 * hidden, out_channels, rng);
  p.b_mix = Tensor({out_channels});
  return p;
}

size_t IRNNLayerParams::param_count() const {
  return W_in.size() + b_in.size() + 4 * W_hh[0].size() + W_mix.size() +
         b_mix.size();
}

IRNNLeaves IRNNLeaves::from(const IRNNLayerParams& p, bool trainable) {
  auto wrap = [trainable](const Tensor& t) {
    return trainable ? leaf(t) : constant(t);
  };
  IRNNLeaves l;
  l.W_in = wrap(p.W_in);
  l.b_in = wrap(p.b_in);
  l.W_mix = wrap(p.W_mix);
  l.b_mix = wrap(p.b_mix);
  for (int d = 0; d < 4; ++d) l.W_hh[d] = wrap(p.W_hh[d]);
  return l;
}

Var irnn_sweep(const Var& x, Direction dir, const Var& W_hh) {
  require_map(x, "irnn_sweep");
  int K = x->value.dim(0);
  int H = x->value.dim(2);
  if (W_hh->value.rank() != 2 || W_hh->value.dim(0) != H ||
      W_hh->value.dim(1) != H)
    throw DimensionError("irnn_sweep: W_hh " + W_hh->value.shape_str() +
                         " does not match H = " + std::to_string(H));

  Tensor out({K, K, H});
  double* o = out.mutable_data();
  const double* xv = x->value.data();
  const double* wv = W_hh->value.data();
  for (int lane = 0; lane < K; ++lane) {
    const double* hprev = nullptr;  // zero hidden state at the boundary
    for (int step = 0; step < K; ++step) {
      int i, j;
      sweep_cell(dir, K, lane, step, i, j);
      size_t off = (static_cast<size_t>(i) * K + j) * H;
      double* h = o + off;
      const double* xc = xv + off;
      for (int c = 0; c < H; ++c) h[c] = xc[c];
      if (hprev) {
        for (int r = 0; r < H; ++r) {
          double hp = hprev[r];
          const double* wrow = wv + static_cast<size_t>(r) * H;
          for (int c = 0; c < H; ++c) h[c] += wrow[c] * hp;
        }
      }
      for (int c = 0; c < H; ++c)
        if (h[c] < 0.0) h[c] = 0.0;
      hprev = h;
    }
  }

  return detail::make_node(
      "irnn_sweep", std::move(out), {x, W_hh}, [dir, K, H](Node& nd) {
        // backprop through time along each lane, reverse sweep order
        const double* hv = nd.value.data();
        const double* g = nd.grad.data();
        const double* wv = nd.parents[1]->value.data();
        Tensor gx({K, K, H});
        Tensor gw({H, H});
        double* pgx = gx.mutable_data();
        double* pgw = gw.mutable_data();
        std::vector<double> dh(static_cast<size_t>(H));
        std::vector<double> dz(static_cast<size_t>(H));
        for (int lane = 0; lane < K; ++lane) {
          for (int c = 0; c < H; ++c) dh[c] = 0.0;
          for (int step = K - 1; step >= 0; --step) {
            int i, j;
            sweep_cell(dir, K, lane, step, i, j);
            size_t off = (static_cast<size_t>(i) * K + j) * H;
            const double* h = hv + off;
            for (int c = 0; c < H; ++c) {
              dh[c] += g[off + c];
              dz[c] = h[c] > 0.0 ? dh[c] : 0.0;  // relu gate
              pgx[off + c] = dz[c];
            }
            if (step > 0) {
              int pi, pj;
              sweep_cell(dir, K, lane, step - 1, pi, pj);
              size_t poff = (static_cast<size_t>(pi) * K + pj) * H;
              const double* hp = hv + poff;
              for (int r = 0; r < H; ++r) {
                const double* wrow = wv + static_cast<size_t>(r) * H;
                double* gwrow = pgw + static_cast<size_t>(r) * H;
                double s = 0.0;
                for (int c = 0; c < H; ++c) {
                  s += wrow[c] * dz[c];
                  gwrow[c] += hp[r] * dz[c];
                }
                dh[r] = s;  // flows into the previous cell's hidden state
              }
            }
          }
        }
        nd.parents[0]->accumulate(gx);
        if (nd.parents[1]->requires_grad) nd.parents[1]->accumulate(gw);
      });
}

Var four_dir_layer(const Var& x, const IRNNLeaves& leaves) {
  using namespace ops;
  Var hin = map_affine(x, leaves.W_in, leaves.b_in);
  std::vector<Var> sweeps;
  sweeps.reserve(4);
  for (Direction dir : kAllDirections)
    sweeps.push_back(irnn_sweep(hin, dir, leaves.W_hh[static_cast<int>(dir)]));
  return map_affine(concat_channels(sweeps), leaves.W_mix, leaves.b_mix);
}

Var stacked_irnn_pool(const Var& F, const IRNNLeaves& layer1,
                      const IRNNLeaves& layer2, double dropout_p,
                      bool training, Rng* dropout_rng) {
  Var h = four_dir_layer(F, layer1);
  if (training && dropout_p > 0.0) {
    if (!dropout_rng)
      throw DimensionError("stacked_irnn_pool: dropout requires an rng");
    h = ops::dropout(h, ops::make_dropout_mask(h->value.shape(), dropout_p,
                                               *dropout_rng));
  }
  Var out = four_dir_layer(h, layer2);
  if (F->value.dim(2) != out->value.dim(2))
    throw DimensionError("stacked_irnn_pool: layer2 must restore D = " +
                         std::to_string(F->value.dim(2)) + " channels, got " +
                         std::to_string(out->value.dim(2)));
  if (training && dropout_p > 0.0)
    out = ops::dropout(out, ops::make_dropout_mask(out->value.shape(),
                                                   dropout_p, *dropout_rng));
  return out;
}

Var spp_pool(const Var& F, const SPPConfig& cfg) {
  require_map(F, "spp_pool");
  if (cfg.levels.empty()) throw DimensionError("spp_pool: empty level list");
  int K = F->value.dim(0), D = F->value.dim(2);
  int total_bins = 0;
  for (int L : cfg.levels) {
    if (L < 1) throw DimensionError("spp_pool: level must be >= 1");
    if (L > K)
      throw DimensionError("spp_pool: level " + std::to_string(L) +
                           " exceeds K = " + std::to_string(K));
    total_bins += L * L;
  }
  Tensor out({total_bins * D});
  // argmax index per output entry, for gradient routing
  std::vector<size_t> argmax(out.size());
  double* o = out.mutable_data();
  const double* fv = F->value.data();
  size_t oi = 0;
  for (int L : cfg.levels) {
    for (int bi = 0; bi < L; ++bi) {
      int r0 = bi * K / L;
      int r1 = (((bi + 1) * K) + L - 1) / L;  // ceil
      for (int bj = 0; bj < L; ++bj) {
        int c0 = bj * K / L;
        int c1 = (((bj + 1) * K) + L - 1) / L;
        for (int c = 0; c < D; ++c) {
          double best = -1e300;
          size_t best_idx = 0;
          for (int i = r0; i < r1; ++i)
            for (int j = c0; j < c1; ++j) {
              size_t idx = (static_cast<size_t>(i) * K + j) * D + c;
              if (fv[idx] > best) {
                best = fv[idx];
                best_idx = idx;
              }
            }
          o[oi] = best;
          argmax[oi] = best_idx;
          ++oi;
        }
      }
    }
  }
  return detail::make_node("spp_pool", std::move(out), {F},
                           [argmax = std::move(argmax), K, D](Node& nd) {
                             Tensor gx({K, K, D});
                             double* p = gx.mutable_data();
                             for (size_t k = 0; k < argmax.size(); ++k)
                               p[argmax[k]] += nd.grad[k];
                             nd.parents[0]->accumulate(gx);
                           });
}

Var global_avg_unpool(const Var& F) {
  require_map(F, "global_avg_unpool");
  int K = F->value.dim(0), D = F->value.dim(2);
  size_t cells = static_cast<size_t>(K) * K;
  std::vector<double> mean(static_cast<size_t>(D), 0.0);
  const double* fv = F->value.data();
  for (size_t cell = 0; cell < cells; ++cell)
    for (int c = 0; c < D; ++c) mean[c] += fv[cell * D + c];
  for (int c = 0; c < D; ++c) mean[c] /= static_cast<double>(cells);
  Tensor out({K, K, D});
  double* o = out.mutable_data();
  for (size_t cell = 0; cell < cells; ++cell)
    for (int c = 0; c < D; ++c) o[cell * D + c] = mean[c];
  return detail::make_node("global_avg_unpool", std::move(out), {F},
                           [K, D](Node& nd) {
                             size_t cells = static_cast<size_t>(K) * K;
                             std::vector<double> gsum(static_cast<size_t>(D), 0.0);
                             for (size_t cell = 0; cell < cells; ++cell)
                               for (int c = 0; c < D; ++c)
                                 gsum[c] += nd.grad[cell * D + c];
                             Tensor gx({K, K, D});
                             double* p = gx.mutable_data();
                             for (size_t cell = 0; cell < cells; ++cell)
                               for (int c = 0; c < D; ++c)
                                 p[cell * D + c] = gsum[c] / static_cast<double>(cells);
                             nd.parents[0]->accumulate(gx);
                           });
}

ConvContextParams ConvContextParams::init(int channels, Rng& rng) {
  ConvContextParams p;
  p.channels = channels;
  int fan = 9 * channels;
  p.W1 = glorot({3, 3, channels, channels}, fan, fan, rng);
  p.b1 = Tensor({channels});
  p.W2 = glorot({3, 3, channels, channels}, fan, fan, rng);
  p.b2 = Tensor({channels});
  return p;
}

size_t ConvContextParams::param_count() const {
  return W1.size() + b1.size() + W2.size() + b2.size();
}

ConvContextLeaves ConvContextLeaves::from(const ConvContextParams& p,
                                          bool trainable) {
  auto wrap = [trainable](const Tensor& t) {
    return trainable ? leaf(t) : constant(t);
  };
  return {wrap(p.W1), wrap(p.b1), wrap(p.W2), wrap(p.b2)};
}

Var stacked_conv_context(const Var& F, const ConvContextLeaves& leaves) {
  require_map(F, "stacked_conv_context");
  if (F->value.dim(0) < 5)
    throw DimensionError("stacked_conv_context requires K >= 5, got K = " +
                         std::to_string(F->value.dim(0)));
  using namespace ops;
  Var h = relu(conv2d(F, leaves.W1, leaves.b1, 1));
  return relu(conv2d(h, leaves.W2, leaves.b2, 1));
}

ContextKind context_kind_from_string(const std::string& s) {
  if (s == "irnn2") return ContextKind::irnn2;
  if (s == "spp") return ContextKind::spp;
  if (s == "global_avg") return ContextKind::global_avg;
  if (s == "stacked_conv") return ContextKind::stacked_conv;
  throw DimensionError("unknown context model '" + s + "'");
}

std::string to_string(ContextKind k) {
  switch (k) {
    case ContextKind::irnn2: return "irnn2";
    case ContextKind::spp: return "spp";
    case ContextKind::global_avg: return "global_avg";
    case ContextKind::stacked_conv: return "stacked_conv";
  }
  return "?";
}

}  // namespace migate
