#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "migate/tensor.hpp"

namespace migate {

// Reverse-mode tape node. `backward_fn` reads this node's grad and adds the
// chain-rule contributions into the parents' grads. Traversal visits each
// node once, in reverse topological order.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // lazily allocated, same shape as value
  bool requires_grad = true;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_buffer();
  void accumulate(const Tensor& g);
};

Var leaf(Tensor t);        // trainable input, grad tracked
Var constant(Tensor t);    // grad not tracked

// Runs backward from a scalar root (seed gradient 1) or from a root whose
// grad has been seeded by the caller.
void backward(const Var& root, bool seed_ones = true);

namespace detail {
// node constructor for modules that define their own ops (custom backward)
Var make_node(const char* op, Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> bwd);
}  // namespace detail

namespace ops {

// elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);
Var softplus(const Var& a);  // stable: max(z,0) + log1p(exp(-|z|))

// reductions / vectors
Var sum(const Var& a);                       // -> shape {1}
Var add_n(const std::vector<Var>& scalars);  // sum of same-shaped vars
Var dot(const Var& a, const Var& b);         // -> shape {1}
Var flatten(const Var& a);
Var mul_s(const Var& a, const Var& b);  // scalar * scalar
Var div_s(const Var& a, const Var& b);
Var sqrt_s(const Var& a);

// out = W^T x + b for x:{n}, W:{n,m}, b:{m}
Var affine(const Var& x, const Var& W, const Var& b);

// per-location affine over a {K,K,Cin} map (a 1x1 convolution):
// out(i,j,:) = W^T x(i,j,:) + b, W:{Cin,Cout}
Var map_affine(const Var& x, const Var& W, const Var& b);

// channel concat of same-spatial-shape maps
Var concat_channels(const std::vector<Var>& maps);

// {n} -> {n}, x / ||x||_2; a zero input is passed through unchanged and
// *degenerate is set when provided
Var l2_normalize(const Var& x, bool* degenerate = nullptr);

// 2-D convolution with same padding (odd kernels) and stride;
// x:{H,W,Cin}, W:{kh,kw,Cin,Cout}, b:{Cout}
Var conv2d(const Var& x, const Var& W, const Var& b, int stride);

// inverted dropout with a fixed mask of {0, 1/(1-p)} entries
Var dropout(const Var& x, const Tensor& mask);
Tensor make_dropout_mask(const std::vector<int>& shape, double p, Rng& rng);

Var cosine(const Var& a, const Var& b);  // scalar similarity

}  // namespace ops

}  // namespace migate
