#include <doctest.h>

#include <cmath>
#include <set>

#include "migate/autograd.hpp"
#include "migate/gradcheck.hpp"

using namespace migate;

TEST_CASE("tensor copies share storage until one side mutates") {
  Tensor a({2, 3}, 1.5);
  Tensor b = a;
  CHECK(a.data() == b.data());
  b.mutable_data()[0] = 9.0;
  CHECK(a.data() != b.data());
  CHECK(a[0] == 1.5);
  CHECK(b[0] == 9.0);
}

TEST_CASE("tensor from() lays values out row-major") {
  Tensor t = Tensor::from({2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(t[t.idx3(1, 0, 1)] == 5.0);
  CHECK(t[t.idx3(0, 1, 0)] == 2.0);
  CHECK(t.size() == 8);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0}), DimensionError);
}

TEST_CASE("check_finite names the offending tensor") {
  Tensor t({3}, 0.0);
  t.set(1, std::nan(""));
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_WITH_AS(t.check_finite("gate.U"),
                       doctest::Contains("gate.U"), NumericError);
}

TEST_CASE("add_inplace rejects shape mismatch") {
  Tensor a({2, 2});
  Tensor b({4});
  CHECK_THROWS_AS(a.add_inplace(b), DimensionError);
}

TEST_CASE("f32 precision rounds stored values through float") {
  double v = 1.0 + 1e-12;  // not representable in float
  set_precision(Precision::f32);
  Tensor t({1}, v);
  t.quantize();
  CHECK(t[0] == 1.0);
  CHECK(t[0] == static_cast<double>(static_cast<float>(v)));
  set_precision(Precision::f64);
  Tensor u({1}, v);
  u.quantize();
  CHECK(u[0] == v);
}

TEST_CASE("rng streams are deterministic and fork() decorrelates") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng base(7);
  Rng f1 = base.fork(1), f2 = base.fork(2);
  int agree = 0;
  for (int i = 0; i < 64; ++i)
    if (f1.uniform_int(1000) == f2.uniform_int(1000)) ++agree;
  CHECK(agree < 5);

  Rng r(123);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    int k = r.uniform_int(7);
    CHECK(k >= 0);
    CHECK(k < 7);
  }
}

TEST_CASE("backward accumulates through shared subexpressions") {
  // y = (x + x) . x  =>  dy/dx = 4x summed over entries... checked exactly
  Tensor x0 = Tensor::from({3}, {1.0, -2.0, 0.5});
  Var x = leaf(x0);
  Var y = ops::sum(ops::hadamard(ops::add(x, x), x));
  backward(y);
  for (size_t i = 0; i < 3; ++i)
    CHECK(x->grad[i] == doctest::Approx(4.0 * x0[i]).epsilon(1e-14));
}

TEST_CASE("constants do not receive gradients") {
  Var c = constant(Tensor({2}, 3.0));
  Var x = leaf(Tensor({2}, 2.0));
  Var y = ops::sum(ops::hadamard(c, x));
  backward(y);
  CHECK(c->grad.empty());
  CHECK(x->grad[0] == doctest::Approx(3.0));
}

namespace {

GradCheckReport check_unary(const std::function<Var(const Var&)>& f,
                            const Tensor& x0) {
  return grad_check_graph(
      [&](const std::vector<Var>& vs) { return ops::sum(f(vs[0])); }, {x0},
      {"x"}, 1e-6, 1e-7);
}

}  // namespace

TEST_CASE("elementwise op gradients match central differences") {
  Rng rng(5);
  Tensor x0({4, 3});
  for (size_t i = 0; i < x0.size(); ++i)
    x0.set(i, rng.uniform(-2.0, 2.0) + 0.01);  // keep away from relu/abs kinks
  CHECK(check_unary([](const Var& v) { return ops::sigmoid(v); }, x0).pass);
  CHECK(check_unary([](const Var& v) { return ops::relu(v); }, x0).pass);
  CHECK(check_unary([](const Var& v) { return ops::abs(v); }, x0).pass);
  CHECK(check_unary([](const Var& v) { return ops::softplus(v); }, x0).pass);
  CHECK(check_unary([](const Var& v) { return ops::scale(v, -1.7); }, x0).pass);
}

TEST_CASE("softplus is stable at large magnitudes") {
  Var x = leaf(Tensor::from({2}, {800.0, -800.0}));
  Var y = ops::softplus(x);
  CHECK(y->value[0] == doctest::Approx(800.0));
  CHECK(y->value[1] == doctest::Approx(0.0));
  backward(ops::sum(y));
  CHECK(x->grad.all_finite());
  CHECK(x->grad[0] == doctest::Approx(1.0));
  CHECK(x->grad[1] == doctest::Approx(0.0));
}

TEST_CASE("affine and map_affine gradients match central differences") {
  Rng rng(9);
  auto rand = [&](std::vector<int> shape) {
    Tensor t(shape);
    for (size_t i = 0; i < t.size(); ++i) t.set(i, rng.uniform(-1.0, 1.0));
    return t;
  };
  auto r1 = grad_check_graph(
      [](const std::vector<Var>& v) {
        return ops::sum(ops::affine(v[0], v[1], v[2]));
      },
      {rand({4}), rand({4, 3}), rand({3})}, {"x", "W", "b"}, 1e-6, 1e-7);
  CHECK(r1.pass);
  auto r2 = grad_check_graph(
      [](const std::vector<Var>& v) {
        return ops::sum(ops::map_affine(v[0], v[1], v[2]));
      },
      {rand({3, 3, 2}), rand({2, 5}), rand({5})}, {"x", "W", "b"}, 1e-6, 1e-7);
  CHECK(r2.pass);
}

TEST_CASE("conv2d matches a hand-computed 3x3 same-padding case") {
  // 1-channel 3x3 input, identity-free kernel picking the center + right
  Tensor x = Tensor::from({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor W({3, 3, 1, 1});
  W.set(4, 1.0);  // center tap
  W.set(5, 2.0);  // right neighbor
  Tensor b({1}, 0.5);
  Var y = ops::conv2d(constant(x), constant(W), constant(b), 1);
  // out(i,j) = x(i,j) + 2 x(i,j+1) + 0.5, zero outside
  Tensor expect = Tensor::from({3, 3, 1}, {1 + 4 + .5, 2 + 6 + .5, 3 + .5,
                                           4 + 10 + .5, 5 + 12 + .5, 6 + .5,
                                           7 + 16 + .5, 8 + 18 + .5, 9 + .5});
  for (size_t i = 0; i < expect.size(); ++i)
    CHECK(y->value[i] == doctest::Approx(expect[i]).epsilon(1e-14));

  SUBCASE("stride 2 keeps every other cell") {
    Var y2 = ops::conv2d(constant(x), constant(W), constant(b), 2);
    CHECK(y2->value.dim(0) == 2);
    CHECK(y2->value[y2->value.idx3(1, 1, 0)] ==
          doctest::Approx(9 + .5));
  }
}

TEST_CASE("conv2d gradients match central differences") {
  Rng rng(11);
  auto rand = [&](std::vector<int> shape) {
    Tensor t(shape);
    for (size_t i = 0; i < t.size(); ++i) t.set(i, rng.uniform(-1.0, 1.0));
    return t;
  };
  for (int stride : {1, 2}) {
    auto r = grad_check_graph(
        [stride](const std::vector<Var>& v) {
          return ops::sum(ops::conv2d(v[0], v[1], v[2], stride));
        },
        {rand({4, 4, 2}), rand({3, 3, 2, 3}), rand({3})}, {"x", "W", "b"},
        1e-6, 1e-7);
    CHECK(r.pass);
  }
}

TEST_CASE("l2_normalize yields unit vectors and correct gradients") {
  Tensor x0 = Tensor::from({3}, {3.0, 0.0, 4.0});
  Var x = leaf(x0);
  bool degenerate = false;
  Var y = ops::l2_normalize(x, &degenerate);
  CHECK_FALSE(degenerate);
  CHECK(y->value[0] == doctest::Approx(0.6));
  CHECK(y->value[2] == doctest::Approx(0.8));
  auto r = grad_check_graph(
      [](const std::vector<Var>& v) {
        return ops::dot(ops::l2_normalize(v[0]),
                        constant(Tensor::from({3}, {1.0, -2.0, 0.3})));
      },
      {x0}, {"x"}, 1e-6, 1e-7);
  CHECK(r.pass);

  Var z = leaf(Tensor({3}, 0.0));
  bool flag = false;
  Var out = ops::l2_normalize(z, &flag);
  CHECK(flag);
  CHECK(out->value[0] == 0.0);
}

TEST_CASE("cosine similarity value and gradients") {
  Tensor a0 = Tensor::from({2}, {1.0, 0.0});
  Tensor b0 = Tensor::from({2}, {1.0, 1.0});
  Var c = ops::cosine(constant(a0), constant(b0));
  CHECK(c->value[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  auto r = grad_check_graph(
      [](const std::vector<Var>& v) { return ops::cosine(v[0], v[1]); },
      {Tensor::from({3}, {0.3, -1.2, 0.8}), Tensor::from({3}, {1.1, 0.4, -0.6})},
      {"a", "b"}, 1e-6, 1e-7);
  CHECK(r.pass);
}

TEST_CASE("dropout masks scale surviving entries by 1/(1-p)") {
  Rng rng(3);
  Tensor mask = ops::make_dropout_mask({50, 50}, 0.5, rng);
  int kept = 0;
  for (size_t i = 0; i < mask.size(); ++i) {
    CHECK((mask[i] == 0.0 || mask[i] == doctest::Approx(2.0)));
    if (mask[i] != 0.0) ++kept;
  }
  CHECK(kept > 1000);
  CHECK(kept < 1500);
  Var x = leaf(Tensor({50, 50}, 3.0));
  Var y = ops::dropout(x, mask);
  backward(ops::sum(y));
  for (size_t i = 0; i < mask.size(); ++i)
    CHECK(x->grad[i] == doctest::Approx(mask[i]));
}

TEST_CASE("grad_check flags an injected sign error and names the parameter") {
  Tensor x0 = Tensor::from({2}, {0.7, -0.3});
  ScalarFn f = [](const std::vector<Tensor>& p) {
    return p[0][0] * p[0][0] + p[0][1];
  };
  GradFn wrong = [](const std::vector<Tensor>& p) {
    Tensor g({2});
    g.set(0, -2.0 * p[0][0]);  // sign flipped on purpose
    g.set(1, 1.0);
    return std::vector<Tensor>{g};
  };
  auto r = grad_check(f, wrong, {x0}, {"quad.x"}, 1e-6, 1e-7);
  CHECK_FALSE(r.pass);
  CHECK(r.worst.param == "quad.x");
  CHECK(r.worst.index == 0);
  CHECK(r.max_rel_err > 0.5);
}

TEST_CASE("grad_check rejects non-finite losses with a named probe") {
  ScalarFn f = [](const std::vector<Tensor>& p) {
    return p[0][0] > 0.5 ? std::nan("") : p[0][0];
  };
  GradFn g = [](const std::vector<Tensor>&) {
    return std::vector<Tensor>{Tensor({1}, 1.0)};
  };
  CHECK_THROWS_AS(grad_check(f, g, {Tensor({1}, 0.5)}, {"edge"}, 1e-2, 1e-7),
                  NumericError);
}
