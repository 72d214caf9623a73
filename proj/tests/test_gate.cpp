#include <doctest.h>

#include <cmath>

#include "migate/gate.hpp"
#include "migate/gradcheck.hpp"

using namespace migate;

namespace {

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                   double hi = 1.0) {
  Tensor t(std::move(shape));
  for (size_t i = 0; i < t.size(); ++i) t.set(i, rng.uniform(lo, hi));
  return t;
}

MIGateParams identity_linear_gate(int D, Rng& rng) {
  MIGateParams p = MIGateParams::init(D, D, FusionMode::linear, rng);
  p.mode = FusionMode::linear;
  p.b_a.fill(0.0);
  p.b_b.fill(0.0);
  p.P.fill(0.0);
  for (int i = 0; i < D; ++i) p.P.set(static_cast<size_t>(i) * D + i, 1.0);
  p.b.fill(0.0);
  return p;
}

}  // namespace

TEST_CASE("linear gate reproduces a hand-computed 1x1x1 example") {
  // D = d = 1, U = 2, V = 3, P = 1, all biases zero, gA = 1, gB = 1:
  // F = P^T((U gA)(V gB)) = 2 * 3 = 6
  Rng rng(1);
  MIGateParams p = identity_linear_gate(1, rng);
  p.U.set(0, 2.0);
  p.V.set(0, 3.0);
  ActivationMap gA(Tensor({1, 1, 1}, 1.0));
  ActivationMap gB(Tensor({1, 1, 1}, 1.0));
  ActivationMap F = mi_forward(gA, gB, p);
  CHECK(F.values[0] == doctest::Approx(6.0).epsilon(1e-15));

  // biases shift both embeddings before the product: (2*1+1)(3*1-1) = 6
  p.b_a.set(0, 1.0);
  p.b_b.set(0, -1.0);
  ActivationMap F2 = mi_forward(gA, gB, p);
  CHECK(F2.values[0] == doctest::Approx((2.0 + 1.0) * (3.0 - 1.0)));
}

TEST_CASE("identity linear gate squares its input elementwise") {
  // U = V = P = I, biases zero, gA = gB = g  =>  F = g . g
  Rng rng(2);
  int D = 3;
  MIGateParams p = identity_linear_gate(D, rng);
  p.U.fill(0.0);
  p.V.fill(0.0);
  for (int i = 0; i < D; ++i) {
    p.U.set(static_cast<size_t>(i) * D + i, 1.0);
    p.V.set(static_cast<size_t>(i) * D + i, 1.0);
  }
  Tensor g = rand_tensor({2, 2, D}, rng);
  ActivationMap F = mi_forward(ActivationMap(g.clone()), ActivationMap(g.clone()), p);
  for (size_t i = 0; i < g.size(); ++i)
    CHECK(F.values[i] == doctest::Approx(g[i] * g[i]).epsilon(1e-14));
}

TEST_CASE("gated mode keeps outputs bounded by the sigmoid range") {
  Rng rng(3);
  int D = 4;
  MIGateParams p = MIGateParams::init(D, D, FusionMode::gated, rng);
  Tensor big = rand_tensor({3, 3, D}, rng, 50.0, 100.0);
  ActivationMap F = mi_forward(ActivationMap(big.clone()),
                               ActivationMap(big.clone()), p);
  // joint activations are in (0,1), so |F| <= sum_k |P_kj| + |b_j|
  for (int j = 0; j < D; ++j) {
    double bound = std::abs(p.b[static_cast<size_t>(j)]);
    for (int k = 0; k < D; ++k)
      bound += std::abs(p.P[static_cast<size_t>(k) * D + j]);
    for (int c = 0; c < 9; ++c)
      CHECK(std::abs(F.values[static_cast<size_t>(c) * D + j]) <= bound + 1e-12);
  }
}

TEST_CASE("concat ablation uses a 2d x D projection and both streams") {
  Rng rng(4);
  int D = 3, d = 2;
  MIGateParams p = MIGateParams::init(D, d, FusionMode::concat, rng);
  CHECK(p.P.dim(0) == 2 * d);
  CHECK(p.P.dim(1) == D);
  Tensor a = rand_tensor({2, 2, D}, rng);
  Tensor b = rand_tensor({2, 2, D}, rng);
  ActivationMap F = mi_forward(ActivationMap(a.clone()), ActivationMap(b.clone()), p);
  // manual recomputation of one cell
  auto embed = [&](const Tensor& W, const Tensor& bias, const double* x) {
    std::vector<double> e(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) {
      e[static_cast<size_t>(k)] = bias[static_cast<size_t>(k)];
      for (int i = 0; i < D; ++i)
        e[static_cast<size_t>(k)] += W[static_cast<size_t>(i) * d + k] * x[i];
      e[static_cast<size_t>(k)] = 1.0 / (1.0 + std::exp(-e[static_cast<size_t>(k)]));
    }
    return e;
  };
  auto ea = embed(p.U, p.b_a, a.data());
  auto eb = embed(p.V, p.b_b, b.data());
  for (int j = 0; j < D; ++j) {
    double f = p.b[static_cast<size_t>(j)];
    for (int k = 0; k < d; ++k) f += p.P[static_cast<size_t>(k) * D + j] * ea[static_cast<size_t>(k)];
    for (int k = 0; k < d; ++k)
      f += p.P[static_cast<size_t>(d + k) * D + j] * eb[static_cast<size_t>(k)];
    CHECK(F.values[static_cast<size_t>(j)] == doctest::Approx(f).epsilon(1e-12));
  }
}

TEST_CASE("gate parameter gradients match central differences in every mode") {
  Rng rng(5);
  int D = 3, K = 2;
  Tensor a = rand_tensor({K, K, D}, rng);
  Tensor b = rand_tensor({K, K, D}, rng);
  for (FusionMode mode :
       {FusionMode::linear, FusionMode::gated, FusionMode::concat}) {
    MIGateParams p = MIGateParams::init(D, 2, mode, rng);
    std::vector<Tensor> params = {p.U, p.V, p.b_a, p.b_b, p.P, p.b, a, b};
    auto r = grad_check_graph(
        [&](const std::vector<Var>& v) {
          MIGateLeaves l{v[0], v[1], v[2], v[3], v[4], v[5]};
          return ops::sum(mi_forward(v[6], v[7], l, mode));
        },
        params, {"U", "V", "b_a", "b_b", "P", "b", "gA", "gB"}, 1e-6, 1e-7);
    INFO("mode ", to_string(mode), " worst ", r.worst.param);
    CHECK(r.pass);
  }
}

TEST_CASE("closed-form input gradients equal autodiff to 1e-12") {
  Rng rng(6);
  int D = 4, K = 3;
  MIGateParams p = identity_linear_gate(D, rng);
  Tensor a = rand_tensor({K, K, D}, rng);
  Tensor b = rand_tensor({K, K, D}, rng);
  Tensor upstream = rand_tensor({K, K, D}, rng);

  MIGateInputGrads cf = mi_backward_closed_form(
      ActivationMap(a.clone()), ActivationMap(b.clone()), p, upstream);

  Var va = leaf(a.clone()), vb = leaf(b.clone());
  Var F = mi_forward(va, vb, MIGateLeaves::from(p, false), FusionMode::linear);
  F->grad_buffer() = upstream.clone();
  backward(F, false);

  double max_abs = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    max_abs = std::max(max_abs, std::abs(cf.dgA[i] - va->grad[i]));
    max_abs = std::max(max_abs, std::abs(cf.dgB[i] - vb->grad[i]));
  }
  CHECK(max_abs < 1e-12);
}

TEST_CASE("closed-form backward rejects configurations it is not valid for") {
  Rng rng(7);
  int D = 3;
  ActivationMap a(Tensor({2, 2, D}, 0.1));
  ActivationMap b(Tensor({2, 2, D}, 0.2));
  Tensor up({2, 2, D}, 1.0);

  MIGateParams gated = MIGateParams::init(D, D, FusionMode::gated, rng);
  CHECK_THROWS_AS(mi_backward_closed_form(a, b, gated, up), DimensionError);

  MIGateParams biased = identity_linear_gate(D, rng);
  biased.b_a.set(0, 0.5);
  CHECK_THROWS_AS(mi_backward_closed_form(a, b, biased, up), DimensionError);

  MIGateParams proj = identity_linear_gate(D, rng);
  proj.P.set(1, 0.25);  // not the identity any more
  CHECK_THROWS_AS(mi_backward_closed_form(a, b, proj, up), DimensionError);
}

TEST_CASE("gate validates map shapes") {
  Rng rng(8);
  MIGateParams p = MIGateParams::init(3, 3, FusionMode::gated, rng);
  CHECK_THROWS_AS(ActivationMap(Tensor({2, 3, 3})), DimensionError);
  ActivationMap ok(Tensor({2, 2, 3}));
  ActivationMap wrong_d(Tensor({2, 2, 4}));
  CHECK_THROWS_AS(mi_forward(ok, wrong_d, p), DimensionError);
}
