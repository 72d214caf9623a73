#include <doctest.h>

#include <cmath>

#include "migate/gradcheck.hpp"
#include "migate/spatial.hpp"

using namespace migate;

namespace {

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                   double hi = 1.0) {
  Tensor t(std::move(shape));
  for (size_t i = 0; i < t.size(); ++i) t.set(i, rng.uniform(lo, hi));
  return t;
}

Tensor identity(int n) {
  Tensor t({n, n});
  for (int i = 0; i < n; ++i) t.set(static_cast<size_t>(i) * n + i, 1.0);
  return t;
}

// which output cells respond when one input cell is perturbed
std::vector<bool> response_set(const std::function<Var(const Var&)>& f,
                               int K, int H, int pi, int pj, double thresh) {
  Tensor base({K, K, H}, 0.25);
  Tensor bumped = base.clone();
  for (int c = 0; c < H; ++c)
    bumped.set(bumped.idx3(pi, pj, c), 0.25 + 0.5);
  Var y0 = f(constant(base));
  Var y1 = f(constant(bumped));
  std::vector<bool> hit(static_cast<size_t>(K) * K, false);
  int Dout = y0->value.dim(2);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      for (int c = 0; c < Dout; ++c) {
        size_t idx = y0->value.idx3(i, j, c);
        if (std::abs(y1->value[idx] - y0->value[idx]) > thresh)
          hit[static_cast<size_t>(i) * K + j] = true;
      }
  return hit;
}

}  // namespace

TEST_CASE("identity left-to-right sweep computes exact row prefix sums") {
  Rng rng(1);
  int K = 5, H = 3;
  Tensor x = rand_tensor({K, K, H}, rng, 0.0, 1.0);  // non-negative: relu inert
  Var h = irnn_sweep(constant(x.clone()), Direction::left_to_right,
                     constant(identity(H)));
  for (int i = 0; i < K; ++i)
    for (int c = 0; c < H; ++c) {
      double acc = 0.0;
      for (int j = 0; j < K; ++j) {
        acc += x[x.idx3(i, j, c)];
        CHECK(h->value[h->value.idx3(i, j, c)] == doctest::Approx(acc).epsilon(1e-14));
      }
    }
}

TEST_CASE("the four sweep directions are coherent mirror images") {
  Rng rng(2);
  int K = 4, H = 2;
  Tensor x = rand_tensor({K, K, H}, rng, 0.0, 1.0);
  Tensor mirrored({K, K, H});
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      for (int c = 0; c < H; ++c)
        mirrored.set(mirrored.idx3(i, K - 1 - j, c), x[x.idx3(i, j, c)]);
  Var fwd = irnn_sweep(constant(x.clone()), Direction::left_to_right,
                       constant(identity(H)));
  Var bwd = irnn_sweep(constant(mirrored), Direction::right_to_left,
                       constant(identity(H)));
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      for (int c = 0; c < H; ++c)
        CHECK(bwd->value[bwd->value.idx3(i, K - 1 - j, c)] ==
              doctest::Approx(fwd->value[fwd->value.idx3(i, j, c)]));
}

TEST_CASE("sweep relu clamps negative pre-activations") {
  int K = 2, H = 1;
  Tensor x = Tensor::from({K, K, H}, {-1.0, 5.0, 2.0, -10.0});
  Var h = irnn_sweep(constant(x), Direction::left_to_right,
                     constant(identity(H)));
  CHECK(h->value[0] == 0.0);  // max(-1, 0)
  CHECK(h->value[1] == 5.0);  // max(0 + 5, 0)
  CHECK(h->value[2] == 2.0);
  CHECK(h->value[3] == 0.0);  // max(2 - 10, 0)
}

TEST_CASE("irnn sweep gradients match central differences") {
  Rng rng(3);
  int K = 3, H = 2;
  Tensor x = rand_tensor({K, K, H}, rng, 0.05, 1.0);  // off the relu kink
  Tensor W = rand_tensor({H, H}, rng, -0.4, 0.4);
  for (Direction dir : kAllDirections) {
    auto r = grad_check_graph(
        [dir](const std::vector<Var>& v) {
          return ops::sum(irnn_sweep(v[0], dir, v[1]));
        },
        {x, W}, {"x", "W_hh"}, 1e-6, 1e-6);
    INFO("direction ", static_cast<int>(dir), " worst ", r.worst.param);
    CHECK(r.pass);
  }
}

TEST_CASE("four-direction layer gradients match central differences") {
  Rng rng(4);
  int K = 3, C = 2, H = 2, Cout = 2;
  IRNNLayerParams p = IRNNLayerParams::init(C, H, Cout, rng);
  Tensor x = rand_tensor({K, K, C}, rng, 0.05, 1.0);
  std::vector<Tensor> params = {x,        p.W_in,   p.b_in,   p.W_hh[0],
                                p.W_hh[1], p.W_hh[2], p.W_hh[3], p.W_mix,
                                p.b_mix};
  auto r = grad_check_graph(
      [](const std::vector<Var>& v) {
        IRNNLeaves l;
        l.W_in = v[1];
        l.b_in = v[2];
        for (int d = 0; d < 4; ++d) l.W_hh[static_cast<size_t>(d)] = v[3 + static_cast<size_t>(d)];
        l.W_mix = v[7];
        l.b_mix = v[8];
        return ops::sum(four_dir_layer(v[0], l));
      },
      params,
      {"x", "W_in", "b_in", "W_l2r", "W_r2l", "W_t2b", "W_b2t", "W_mix",
       "b_mix"},
      1e-6, 1e-6);
  INFO("worst ", r.worst.param, " rel ", r.max_rel_err);
  CHECK(r.pass);
}

namespace {

// strictly positive weights so a positive input bump can never be wiped out
// by a relu on its way across the map; the receptive field is then exactly
// the set of reachable cells
IRNNLayerParams positive_layer(int channels, Rng& rng) {
  IRNNLayerParams p = IRNNLayerParams::init(channels, channels, channels, rng);
  for (auto* t : {&p.W_in, &p.W_mix})
    for (size_t i = 0; i < t->size(); ++i) t->set(i, rng.uniform(0.05, 0.3));
  return p;
}

}  // namespace

TEST_CASE("one four-direction layer sees exactly its row and column") {
  int K = 6, H = 2;
  Rng rng(5);
  IRNNLayerParams p = positive_layer(H, rng);
  IRNNLeaves leaves = IRNNLeaves::from(p, false);
  int pi = 2, pj = 4;
  auto hit = response_set(
      [&](const Var& v) { return four_dir_layer(v, leaves); }, K, H, pi, pj,
      1e-9);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      bool expected = (i == pi) || (j == pj);
      CHECK(hit[static_cast<size_t>(i) * K + j] == expected);
    }
}

TEST_CASE("two stacked four-direction layers cover the full grid") {
  int K = 6, H = 2;
  Rng rng(6);
  IRNNLayerParams p1 = positive_layer(H, rng);
  IRNNLayerParams p2 = positive_layer(H, rng);
  IRNNLeaves l1 = IRNNLeaves::from(p1, false);
  IRNNLeaves l2 = IRNNLeaves::from(p2, false);
  auto hit = response_set(
      [&](const Var& v) {
        return stacked_irnn_pool(v, l1, l2, 0.0, false, nullptr);
      },
      K, H, 2, 4, 1e-9);
  for (bool h : hit) CHECK(h);
}

TEST_CASE("stacked 3x3 convolutions reach at most a 5x5 window") {
  int K = 9, C = 2;
  Rng rng(7);
  ConvContextParams p = ConvContextParams::init(C, rng);
  ConvContextLeaves leaves = ConvContextLeaves::from(p, false);
  int pi = 4, pj = 4;
  auto hit = response_set(
      [&](const Var& v) { return stacked_conv_context(v, leaves); }, K, C, pi,
      pj, 1e-9);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      if (hit[static_cast<size_t>(i) * K + j]) {
        CHECK(std::abs(i - pi) <= 2);
        CHECK(std::abs(j - pj) <= 2);
      }
}

TEST_CASE("stacked_conv_context rejects K < 5 and checks gradients") {
  Rng rng(8);
  ConvContextParams p = ConvContextParams::init(2, rng);
  ConvContextLeaves leaves = ConvContextLeaves::from(p, false);
  CHECK_THROWS_AS(stacked_conv_context(constant(Tensor({4, 4, 2})), leaves),
                  DimensionError);
  // positive kernels and inputs keep every relu strictly active, so the
  // finite-difference probes never cross a kink
  Tensor x = rand_tensor({5, 5, 2}, rng, 0.05, 1.0);
  for (auto* t : {&p.W1, &p.W2})
    for (size_t i = 0; i < t->size(); ++i) t->set(i, rng.uniform(0.05, 0.3));
  auto r = grad_check_graph(
      [&](const std::vector<Var>& v) {
        ConvContextLeaves l{v[1], v[2], v[3], v[4]};
        return ops::sum(stacked_conv_context(v[0], l));
      },
      {x, p.W1, p.b1, p.W2, p.b2}, {"x", "W1", "b1", "W2", "b2"}, 1e-6, 1e-6);
  CHECK(r.pass);
}

TEST_CASE("spp max pooling matches a brute-force bin oracle") {
  Rng rng(9);
  int K = 5, D = 3;  // K not divisible by level 2: exercises the bin rounding
  Tensor F = rand_tensor({K, K, D}, rng);
  SPPConfig cfg;
  cfg.levels = {1, 2};
  Var out = spp_pool(constant(F.clone()), cfg);
  CHECK(out->value.size() == static_cast<size_t>(D) * (1 + 4));
  size_t oi = 0;
  for (int L : cfg.levels)
    for (int bi = 0; bi < L; ++bi)
      for (int bj = 0; bj < L; ++bj)
        for (int c = 0; c < D; ++c) {
          int r0 = bi * K / L, r1 = ((bi + 1) * K + L - 1) / L;
          int c0 = bj * K / L, c1 = ((bj + 1) * K + L - 1) / L;
          double best = -1e300;
          for (int i = r0; i < r1; ++i)
            for (int j = c0; j < c1; ++j)
              best = std::max(best, F[F.idx3(i, j, c)]);
          CHECK(out->value[oi++] == best);
        }
}

TEST_CASE("spp gradient routes to the argmax cell only") {
  Tensor F({3, 3, 1});
  F.set(F.idx3(1, 2, 0), 7.0);
  Var x = leaf(F);
  SPPConfig cfg;
  cfg.levels = {1};
  backward(ops::sum(spp_pool(x, cfg)));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(x->grad[x->grad.idx3(i, j, 0)] == ((i == 1 && j == 2) ? 1.0 : 0.0));
}

TEST_CASE("spp rejects invalid level lists") {
  Var F = constant(Tensor({3, 3, 2}));
  SPPConfig empty;
  empty.levels = {};
  CHECK_THROWS_AS(spp_pool(F, empty), DimensionError);
  SPPConfig toobig;
  toobig.levels = {4};
  CHECK_THROWS_AS(spp_pool(F, toobig), DimensionError);
}

TEST_CASE("global average context broadcasts the spatial mean") {
  Rng rng(10);
  int K = 4, D = 2;
  Tensor F = rand_tensor({K, K, D}, rng);
  Var out = global_avg_unpool(constant(F.clone()));
  for (int c = 0; c < D; ++c) {
    double mean = 0.0;
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) mean += F[F.idx3(i, j, c)];
    mean /= K * K;
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j)
        CHECK(out->value[out->value.idx3(i, j, c)] == doctest::Approx(mean));
  }
  auto r = grad_check_graph(
      [&](const std::vector<Var>& v) {
        return ops::dot(ops::flatten(global_avg_unpool(v[0])),
                        constant(Tensor({static_cast<int>(F.size())}, 0.3)));
      },
      {F}, {"F"}, 1e-6, 1e-7);
  CHECK(r.pass);
}

TEST_CASE("stacked_irnn_pool enforces the channel-restoring second layer") {
  Rng rng(11);
  IRNNLayerParams p1 = IRNNLayerParams::init(3, 2, 2, rng);
  IRNNLayerParams bad2 = IRNNLayerParams::init(2, 2, 5, rng);  // 5 != 3
  IRNNLeaves l1 = IRNNLeaves::from(p1, false);
  IRNNLeaves l2 = IRNNLeaves::from(bad2, false);
  CHECK_THROWS_AS(
      stacked_irnn_pool(constant(Tensor({4, 4, 3}, 0.1)), l1, l2, 0.0, false,
                        nullptr),
      DimensionError);
}
