#include "migate/checks.hpp"

#include "migate/config.hpp"
#include "migate/eval.hpp"
#include "migate/pipeline.hpp"

namespace migate {

namespace {

Tensor rand_tensor(const std::vector<int>& shape, Rng& rng, double lo = -0.5,
                   double hi = 0.5) {
  Tensor t(shape);
  double* p = t.mutable_data();
  for (size_t i = 0; i < t.size(); ++i) p[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

ModelConfig tiny_model_config(ContextKind context, FusionMode fusion) {
  ModelConfig m;
  m.encoder = make_encoder_config(8, 2, 4);
  m.fusion = fusion;
  m.context = context;
  m.hidden = 4;
  m.head_embed = 4;
  m.finalize();
  return m;
}

GradCheckReport composite_grad_check(uint64_t seed, double eps, double tol) {
  ModelConfig cfg = tiny_model_config();
  ModelParams base = ModelParams::init(cfg, seed);

  Rng rng = Rng(seed).fork(99);
  std::vector<Sample> samples(4);
  for (int i = 0; i < 4; ++i) {
    samples[static_cast<size_t>(i)].image = rand_tensor({8, 8, 3}, rng, 0, 1);
    samples[static_cast<size_t>(i)].identity = i / 2;
  }
  std::vector<const Sample*> imgs;
  for (const auto& s : samples) imgs.push_back(&s);
  Supervision sup = Supervision::from_labels({0, 0, 1, 1});
  std::vector<double> mean = {0.5, 0.5, 0.5};
  LossConfig lcfg;

  std::vector<Tensor> init;
  std::vector<std::string> names;
  for (auto& [name, t] : base.named_params()) {
    names.push_back(name);
    init.push_back(t->clone());
  }

  auto with_params = [&](const std::vector<Tensor>& ps) {
    ModelParams p = base;
    auto ptrs = p.named_params();
    for (size_t i = 0; i < ptrs.size(); ++i) *ptrs[i].second = ps[i];
    return p;
  };
  ScalarFn f = [&](const std::vector<Tensor>& ps) {
    ModelParams p = with_params(ps);
    return batch_pass(p, imgs, sup, mean, lcfg, /*training=*/false, 0,
                      /*compute_grads=*/false)
        .loss;
  };
  GradFn g = [&](const std::vector<Tensor>& ps) {
    ModelParams p = with_params(ps);
    return batch_pass(p, imgs, sup, mean, lcfg, /*training=*/false, 0,
                      /*compute_grads=*/true)
        .grads;
  };
  return grad_check(f, g, init, names, eps, tol);
}

std::vector<ModuleCheck> module_grad_checks(uint64_t seed, double eps,
                                            double tol) {
  std::vector<ModuleCheck> out;
  Rng master(seed);

  {  // gate, all three fusion modes
    int K = 2, D = 3, d = 3;
    for (FusionMode mode :
         {FusionMode::linear, FusionMode::gated, FusionMode::concat}) {
      Rng rng = master.fork(1 + static_cast<uint64_t>(mode));
      int p_rows = mode == FusionMode::concat ? 2 * d : d;
      std::vector<Tensor> params = {
          rand_tensor({D, d}, rng),      rand_tensor({D, d}, rng),
          rand_tensor({d}, rng),         rand_tensor({d}, rng),
          rand_tensor({p_rows, D}, rng), rand_tensor({D}, rng),
          rand_tensor({K, K, D}, rng),   rand_tensor({K, K, D}, rng)};
      std::vector<std::string> names = {"U",   "V", "b_a", "b_b",
                                        "P",   "b", "gA",  "gB"};
      auto build = [mode](const std::vector<Var>& v) {
        MIGateLeaves l;
        l.U = v[0];
        l.V = v[1];
        l.b_a = v[2];
        l.b_b = v[3];
        l.P = v[4];
        l.b = v[5];
        return ops::sum(mi_forward(v[6], v[7], l, mode));
      };
      out.push_back({"gate[" + to_string(mode) + "]",
                     grad_check_graph(build, params, names, eps, tol)});
    }
  }

  {  // one directional sweep
    Rng rng = master.fork(10);
    int K = 3, H = 3;
    std::vector<Tensor> params = {rand_tensor({K, K, H}, rng),
                                  rand_tensor({H, H}, rng)};
    auto build = [](const std::vector<Var>& v) {
      return ops::sum(irnn_sweep(v[0], Direction::top_to_bottom, v[1]));
    };
    out.push_back({"irnn_sweep",
                   grad_check_graph(build, params, {"x", "W_hh"}, eps, tol)});
  }

  {  // full four-direction layer
    Rng rng = master.fork(11);
    int K = 3, C = 3, H = 3, Co = 2;
    std::vector<Tensor> params = {
        rand_tensor({C, H}, rng),      rand_tensor({H}, rng),
        rand_tensor({H, H}, rng),      rand_tensor({H, H}, rng),
        rand_tensor({H, H}, rng),      rand_tensor({H, H}, rng),
        rand_tensor({4 * H, Co}, rng), rand_tensor({Co}, rng),
        rand_tensor({K, K, C}, rng)};
    std::vector<std::string> names = {"W_in",  "b_in",  "W_hh0", "W_hh1",
                                      "W_hh2", "W_hh3", "W_mix", "b_mix", "x"};
    auto build = [](const std::vector<Var>& v) {
      IRNNLeaves l;
      l.W_in = v[0];
      l.b_in = v[1];
      for (int i = 0; i < 4; ++i) l.W_hh[static_cast<size_t>(i)] = v[2 + i];
      l.W_mix = v[6];
      l.b_mix = v[7];
      return ops::sum(four_dir_layer(v[8], l));
    };
    out.push_back(
        {"four_dir_layer", grad_check_graph(build, params, names, eps, tol)});
  }

  {  // conv context
    Rng rng = master.fork(12);
    int K = 5, C = 2;
    std::vector<Tensor> params = {
        rand_tensor({3, 3, C, C}, rng), rand_tensor({C}, rng),
        rand_tensor({3, 3, C, C}, rng), rand_tensor({C}, rng),
        rand_tensor({K, K, C}, rng)};
    auto build = [](const std::vector<Var>& v) {
      ConvContextLeaves l;
      l.W1 = v[0];
      l.b1 = v[1];
      l.W2 = v[2];
      l.b2 = v[3];
      return ops::sum(stacked_conv_context(v[4], l));
    };
    out.push_back({"stacked_conv_context",
                   grad_check_graph(build, params,
                                    {"W1", "b1", "W2", "b2", "F"}, eps, tol)});
  }

  {  // pooling contexts
    Rng rng = master.fork(13);
    std::vector<Tensor> params = {rand_tensor({4, 4, 3}, rng)};
    auto build_spp = [](const std::vector<Var>& v) {
      return ops::sum(spp_pool(v[0], SPPConfig{}));
    };
    out.push_back(
        {"spp_pool", grad_check_graph(build_spp, params, {"F"}, eps, tol)});
    auto build_avg = [](const std::vector<Var>& v) {
      return ops::sum(global_avg_unpool(v[0]));
    };
    out.push_back({"global_avg_unpool",
                   grad_check_graph(build_avg, params, {"F"}, eps, tol)});
  }

  {  // head: residual embeddings + cosine
    Rng rng = master.fork(14);
    int K = 2, D = 3, E = 3, in = K * K * D;
    std::vector<Tensor> params = {
        rand_tensor({in, E}, rng), rand_tensor({E}, rng),
        rand_tensor({K, K, D}, rng), rand_tensor({K, K, D}, rng),
        rand_tensor({K, K, D}, rng)};
    auto build = [](const std::vector<Var>& v) {
      HeadLeaves h;
      h.W_fc = v[0];
      h.b_fc = v[1];
      Var ea = residual_embed(v[2], v[4], h);
      Var eb = residual_embed(v[3], v[4], h);
      return ops::cosine(ea, eb);
    };
    out.push_back(
        {"residual_head",
         grad_check_graph(build, params, {"W_fc", "b_fc", "gA", "gB", "ctx"},
                          eps, tol)});
  }

  {  // loss graph over scores
    Rng rng = master.fork(15);
    Supervision sup = Supervision::from_labels({0, 0, 1});
    std::vector<Tensor> params;
    std::vector<std::string> names;
    for (int i = 0; i < 9; ++i)
      if (i % 4 != 0) {  // off-diagonal of the 3x3 matrix
        params.push_back(rand_tensor({1}, rng, -1, 1));
        names.push_back("S" + std::to_string(i));
      }
    auto build = [sup](const std::vector<Var>& v) {
      std::vector<Var> scores(9);
      size_t k = 0;
      for (int i = 0; i < 9; ++i)
        if (i % 4 != 0) scores[static_cast<size_t>(i)] = v[k++];
      return binomial_deviance_loss_graph(scores, sup, LossConfig{});
    };
    out.push_back(
        {"deviance_loss", grad_check_graph(build, params, names, eps, tol)});
  }

  {  // encoder stack
    Rng rng = master.fork(16);
    EncoderConfig cfg = make_encoder_config(8, 2, 4);
    std::vector<Tensor> params;
    std::vector<std::string> names;
    int cin = cfg.in_channels;
    for (size_t i = 0; i < cfg.layers.size(); ++i) {
      const auto& l = cfg.layers[i];
      params.push_back(rand_tensor({l.kernel, l.kernel, cin, l.channels}, rng));
      params.push_back(rand_tensor({l.channels}, rng));
      names.push_back("W" + std::to_string(i));
      names.push_back("b" + std::to_string(i));
      cin = l.channels;
    }
    Tensor image = rand_tensor({8, 8, 3}, rng, 0, 1);
    auto build = [cfg, image](const std::vector<Var>& v) {
      EncoderLeaves l;
      for (size_t i = 0; i < v.size(); i += 2) {
        l.W.push_back(v[i]);
        l.b.push_back(v[i + 1]);
      }
      return ops::sum(encode(constant(image), cfg, l));
    };
    out.push_back(
        {"encoder", grad_check_graph(build, params, names, eps, tol)});
  }

  return out;
}

}  // namespace migate
