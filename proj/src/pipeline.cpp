#include "migate/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "migate/threads.hpp"

namespace migate {

PairBatch sample_batch(const Dataset& ds, int batch_size, Rng& rng) {
  size_t n = ds.samples.size();
  if (n < 2) throw DimensionError("sample_batch: need at least 2 images");
  size_t take = std::min<size_t>(static_cast<size_t>(batch_size), n);
  std::vector<size_t> all(n);
  std::iota(all.begin(), all.end(), size_t{0});
  for (int attempt = 0; attempt < 1000; ++attempt) {
    // partial Fisher-Yates: first `take` entries are a draw w/o replacement
    for (size_t i = 0; i < take; ++i) {
      size_t j = i + static_cast<size_t>(
                         rng.uniform_int(static_cast<int>(n - i)));
      std::swap(all[i], all[j]);
    }
    PairBatch b;
    b.indices.assign(all.begin(), all.begin() + static_cast<long>(take));
    std::vector<int> labels;
    labels.reserve(take);
    for (size_t idx : b.indices) labels.push_back(ds.samples[idx].identity);
    try {
      b.sup = Supervision::from_labels(labels);
    } catch (const NumericError&) {
      continue;  // no positive or no negative pair: redraw
    }
    return b;
  }
  throw NumericError(
      "sample_batch: could not draw a batch with both positive and negative "
      "pairs (dataset needs >= 2 identities and a repeated identity)");
}

void sgd_step(std::vector<std::pair<std::string, Tensor*>> params,
              const std::vector<Tensor>& grads, SgdState& state, double lr,
              double momentum) {
  if (grads.size() != params.size())
    throw DimensionError("sgd_step: gradient/parameter count mismatch");
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (auto& [name, t] : params) state.velocity.emplace_back(t->shape());
  }
  if (state.velocity.size() != params.size())
    throw DimensionError("sgd_step: optimizer state size mismatch");
  for (size_t k = 0; k < params.size(); ++k) {
    const Tensor& g = grads[k];
    g.check_finite("gradient for " + params[k].first);
    Tensor& v = state.velocity[k];
    Tensor& t = *params[k].second;
    if (!v.same_shape(t) || !g.same_shape(t))
      throw DimensionError("sgd_step: shape mismatch at " + params[k].first);
    double* vp = v.mutable_data();
    double* tp = t.mutable_data();
    const double* gp = g.data();
    for (size_t i = 0; i < t.size(); ++i) {
      vp[i] = momentum * vp[i] - lr * gp[i];
      tp[i] += vp[i];
    }
    v.quantize();
    t.quantize();
  }
}

namespace {

struct GradBag {
  double loss = 0.0;
  std::vector<Tensor> params;           // lazily shaped, by leaf index
  std::vector<Tensor> act_a, act_b;     // per-image activation-map grads
  std::vector<char> has_param, has_a, has_b;
};

void add_into(Tensor& dst, char& has, const Tensor& src) {
  if (!has) {
    dst = src;
    has = 1;
    return;
  }
  double* d = dst.mutable_data();
  const double* s = src.data();
  for (size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// dL/ds and value for one ordered supervision entry
double term_grad(double s, double m, double w, const LossConfig& cfg) {
  double z = -cfg.alpha * (s - cfg.beta) * m;
  double sig = 1.0 / (1.0 + std::exp(-z));
  return -w * cfg.alpha * m * sig;
}

}  // namespace

BatchResult batch_pass(const ModelParams& model,
                       const std::vector<const Sample*>& images,
                       const Supervision& sup,
                       const std::vector<double>& channel_mean,
                       const LossConfig& loss_cfg, bool training,
                       uint64_t dropout_seed, bool compute_grads) {
  size_t n = images.size();
  if (static_cast<int>(n) != sup.n)
    throw DimensionError("batch_pass: supervision size mismatch");
  const ModelConfig& cfg = model.cfg;
  bool shared = cfg.encoder.shared_streams;

  std::vector<Tensor> norm(n);
  for (size_t i = 0; i < n; ++i)
    norm[i] = normalize_image(images[i]->image, channel_mean);

  // forward encodings (plain tensors; pair graphs treat them as leaves)
  std::vector<Tensor> acts_a(n), acts_b(n);
  parallel_chunks(n, [&](int, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      acts_a[i] = encode(norm[i], cfg.encoder, model.enc_a).values;
      if (!shared) acts_b[i] = encode(norm[i], cfg.encoder, model.enc_b).values;
    }
  });
  if (shared) acts_b = acts_a;

  // scored pairs: ordered (i,j), i != j; for shared streams the score is
  // symmetric, so the (i,j)/(j,i) terms collapse onto one graph
  struct Pair {
    int i, j;
    double w_fwd, w_rev;  // w_rev carries the mirrored term (shared streams)
  };
  std::vector<Pair> pairs;
  const double* Wp = sup.W.data();
  const double* Mp = sup.M.data();
  for (int i = 0; i < sup.n; ++i)
    for (int j = shared ? i + 1 : 0; j < sup.n; ++j) {
      if (i == j) continue;
      size_t ij = static_cast<size_t>(i) * sup.n + j;
      size_t ji = static_cast<size_t>(j) * sup.n + i;
      pairs.push_back({i, j, Wp[ij], shared ? Wp[ji] : 0.0});
    }

  auto leaf_names = ModelLeaves::from(model).named_leaves(cfg);
  size_t n_leaves = leaf_names.size();

  int workers = worker_count();
  std::vector<GradBag> bags(static_cast<size_t>(workers));
  for (auto& b : bags) {
    b.params.resize(n_leaves);
    b.has_param.assign(n_leaves, 0);
    b.act_a.resize(n);
    b.act_b.resize(n);
    b.has_a.assign(n, 0);
    b.has_b.assign(n, 0);
  }

  parallel_chunks(pairs.size(), [&](int worker, size_t begin, size_t end) {
    GradBag& bag = bags[static_cast<size_t>(worker)];
    for (size_t p = begin; p < end; ++p) {
      const Pair& pr = pairs[p];
      auto leaves = ModelLeaves::from(model, compute_grads);
      Var va = compute_grads ? leaf(acts_a[static_cast<size_t>(pr.i)])
                             : constant(acts_a[static_cast<size_t>(pr.i)]);
      Var vb = compute_grads ? leaf(acts_b[static_cast<size_t>(pr.j)])
                             : constant(acts_b[static_cast<size_t>(pr.j)]);
      Rng drop = Rng(dropout_seed).fork(static_cast<uint64_t>(p) + 1);
      PairOutputs out = pair_graph(va, vb, cfg, leaves, training, &drop);
      double s = out.similarity->value[0];
      size_t ij = static_cast<size_t>(pr.i) * sup.n + pr.j;
      size_t ji = static_cast<size_t>(pr.j) * sup.n + pr.i;
      double m_fwd = Mp[ij];
      bag.loss += deviance_term(s, m_fwd, pr.w_fwd, loss_cfg);
      double ds = term_grad(s, m_fwd, pr.w_fwd, loss_cfg);
      if (shared) {
        bag.loss += deviance_term(s, Mp[ji], pr.w_rev, loss_cfg);
        ds += term_grad(s, Mp[ji], pr.w_rev, loss_cfg);
      }
      if (!compute_grads) continue;
      out.similarity->grad_buffer().set(0, ds);
      backward(out.similarity, /*seed_ones=*/false);
      auto named = leaves.named_leaves(cfg);
      for (size_t k = 0; k < n_leaves; ++k)
        if (named[k].second->grad.size() > 0)
          add_into(bag.params[k], bag.has_param[k], named[k].second->grad);
      if (va->grad.size() > 0)
        add_into(bag.act_a[static_cast<size_t>(pr.i)],
                 bag.has_a[static_cast<size_t>(pr.i)], va->grad);
      if (vb->grad.size() > 0)
        add_into(bag.act_b[static_cast<size_t>(pr.j)],
                 bag.has_b[static_cast<size_t>(pr.j)], vb->grad);
    }
  });

  BatchResult result;
  for (const auto& b : bags) result.loss += b.loss;
  if (!compute_grads) return result;

  // merge worker bags in worker order: deterministic for a fixed MIGATE_THREADS
  std::vector<Tensor> act_grad_a(n), act_grad_b(n);
  std::vector<char> has_a(n, 0), has_b(n, 0), has_param(n_leaves, 0);
  std::vector<Tensor> param_grads(n_leaves);
  for (auto& b : bags) {
    for (size_t k = 0; k < n_leaves; ++k)
      if (b.has_param[k]) add_into(param_grads[k], has_param[k], b.params[k]);
    for (size_t i = 0; i < n; ++i) {
      if (b.has_a[i]) add_into(act_grad_a[i], has_a[i], b.act_a[i]);
      if (b.has_b[i]) add_into(act_grad_b[i], has_b[i], b.act_b[i]);
    }
  }

  // encoder backward per image, seeded with the merged activation grads
  size_t enc_leaf_count = 2 * model.enc_a.W.size();
  std::vector<GradBag> enc_bags(static_cast<size_t>(workers));
  for (auto& b : enc_bags) {
    b.params.resize(n_leaves);
    b.has_param.assign(n_leaves, 0);
  }
  parallel_chunks(n, [&](int worker, size_t begin, size_t end) {
    GradBag& bag = enc_bags[static_cast<size_t>(worker)];
    for (size_t i = begin; i < end; ++i) {
      auto run_stream = [&](const EncoderParams& enc, const Tensor& seed,
                            size_t leaf_base) {
        EncoderLeaves el = EncoderLeaves::from(enc);
        Var act = encode(constant(norm[i]), cfg.encoder, el);
        act->grad_buffer() = seed;
        backward(act, /*seed_ones=*/false);
        for (size_t l = 0; l < enc.W.size(); ++l) {
          if (el.W[l]->grad.size() > 0)
            add_into(bag.params[leaf_base + 2 * l],
                     bag.has_param[leaf_base + 2 * l], el.W[l]->grad);
          if (el.b[l]->grad.size() > 0)
            add_into(bag.params[leaf_base + 2 * l + 1],
                     bag.has_param[leaf_base + 2 * l + 1], el.b[l]->grad);
        }
      };
      if (shared) {
        if (!has_a[i] && !has_b[i]) continue;
        Tensor seed = has_a[i] ? act_grad_a[i] : act_grad_b[i];
        if (has_a[i] && has_b[i]) {
          Tensor sum = act_grad_a[i];
          char dummy = 1;
          add_into(sum, dummy, act_grad_b[i]);
          seed = sum;
        }
        run_stream(model.enc_a, seed, 0);
      } else {
        if (has_a[i]) run_stream(model.enc_a, act_grad_a[i], 0);
        if (has_b[i]) run_stream(model.enc_b, act_grad_b[i], enc_leaf_count);
      }
    }
  });
  for (auto& b : enc_bags)
    for (size_t k = 0; k < n_leaves; ++k)
      if (b.has_param[k]) add_into(param_grads[k], has_param[k], b.params[k]);

  result.grads.reserve(n_leaves);
  auto shapes = model.named_params();
  for (size_t k = 0; k < n_leaves; ++k) {
    if (!has_param[k]) param_grads[k] = Tensor(shapes[k].second->shape());
    param_grads[k].quantize();
    result.grads.push_back(std::move(param_grads[k]));
  }
  return result;
}

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t epoch, uint64_t batch) {
  uint64_t x = seed ^ (epoch * 0x9E3779B97F4A7C15ull) ^
               (batch * 0xBF58476D1CE4E5B9ull) ^ 0x94D049BB133111EBull;
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  return x;
}

struct ValContext {
  std::vector<const Sample*> images;
  Supervision sup;
  bool usable = false;
};

ValContext make_val_context(const Dataset& val_set) {
  ValContext v;
  if (val_set.samples.size() < 2) return v;
  std::vector<int> labels;
  for (const auto& s : val_set.samples) {
    v.images.push_back(&s);
    labels.push_back(s.identity);
  }
  try {
    v.sup = Supervision::from_labels(labels);
    v.usable = true;
  } catch (const NumericError&) {
    v.images.clear();
  }
  return v;
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& cfg,
                  const WarmStart* warm, std::ostream* log_stream) {
  if (train_set.samples.empty())
    throw DimensionError("train: empty training set");

  TrainResult result;
  result.channel_mean = train_set.channel_mean();

  Dataset aug;
  if (cfg.augment) {
    for (const auto& s : train_set.samples)
      for (auto& a : augment_all(s)) aug.samples.push_back(std::move(a));
  } else {
    aug = train_set;
  }

  ModelParams params = warm ? warm->params
                            : ModelParams::init(model_cfg, cfg.seed);
  SgdState opt = warm ? warm->opt : SgdState{};
  int start_epoch = warm ? warm->start_epoch : 0;

  ValContext val = make_val_context(val_set);

  double lr = cfg.lr;
  int stale = 0;      // epochs since last improvement (early stop)
  int lr_stale = 0;   // epochs since last improvement (plateau decay)
  bool have_best = false;

  size_t n_aug = aug.samples.size();
  int batches_per_epoch = static_cast<int>(std::max<size_t>(
      1, n_aug / static_cast<size_t>(std::max(1, cfg.batch_size))));

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    Rng er = Rng(cfg.seed).fork(0x1000 + static_cast<uint64_t>(epoch));
    double train_loss = 0.0;
    bool aborted = false;
    for (int b = 0; b < batches_per_epoch; ++b) {
      PairBatch pb = sample_batch(aug, cfg.batch_size, er);
      std::vector<const Sample*> imgs;
      imgs.reserve(pb.indices.size());
      for (size_t idx : pb.indices) imgs.push_back(&aug.samples[idx]);
      try {
        BatchResult br = batch_pass(
            params, imgs, pb.sup, result.channel_mean, cfg.loss,
            /*training=*/true,
            mix_seed(cfg.seed, static_cast<uint64_t>(epoch),
                     static_cast<uint64_t>(b)),
            /*compute_grads=*/true);
        if (!std::isfinite(br.loss)) throw NumericError("non-finite loss");
        sgd_step(params.named_params(), br.grads, opt, lr, cfg.momentum);
        train_loss += br.loss;
      } catch (const NumericError& e) {
        if (log_stream)
          *log_stream << "epoch " << epoch << " aborted: " << e.what() << "\n";
        result.diverged = true;
        aborted = true;
        break;
      }
    }
    if (aborted) break;
    train_loss /= batches_per_epoch;

    double val_loss = train_loss;
    if (val.usable) {
      BatchResult vr =
          batch_pass(params, val.images, val.sup, result.channel_mean,
                     cfg.loss, /*training=*/false, 0, /*compute_grads=*/false);
      val_loss = vr.loss;
    }

    result.log.push_back({epoch, train_loss, val_loss, lr});
    if (log_stream)
      *log_stream << "epoch " << epoch << " train_loss " << train_loss
                  << " val_loss " << val_loss << " lr " << lr << "\n";

    if (!have_best || val_loss < result.best_val) {
      have_best = true;
      result.best_val = val_loss;
      result.best_epoch = epoch;
      result.best = params;     // tensors are copy-on-write: cheap snapshot
      result.best_opt = opt;
      stale = 0;
      lr_stale = 0;
    } else {
      ++stale;
      ++lr_stale;
      if (stale > cfg.patience) {
        if (log_stream)
          *log_stream << "early stop at epoch " << epoch << " (best "
                      << result.best_epoch << ")\n";
        break;
      }
      if (lr_stale > cfg.lr_patience) {
        lr *= cfg.lr_decay;
        lr_stale = 0;
        if (log_stream) *log_stream << "lr decayed to " << lr << "\n";
      }
    }
  }

  if (!have_best) {
    result.best = params;
    result.best_opt = opt;
  }
  return result;
}

}  // namespace migate
