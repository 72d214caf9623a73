#include "migate/autograd.hpp"

#include <cmath>
#include <unordered_set>

namespace migate {

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  grad_buffer().add_inplace(g);
}

namespace {

Var make(const char* op, Tensor value, std::vector<Var> parents,
         std::function<void(Node&)> bwd) {
  value.quantize();
  if (!value.all_finite()) value.check_finite(op);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(bwd);
  }
  return n;
}

void topo(const Var& root, std::vector<Node*>& order) {
  // iterative post-order DFS
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

namespace detail {
Var make_node(const char* op, Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> bwd) {
  return make(op, std::move(value), std::move(parents), std::move(bwd));
}
}  // namespace detail

Var leaf(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = true;
  return n;
}

Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = false;
  return n;
}

void backward(const Var& root, bool seed_ones) {
  if (!root->requires_grad) return;
  if (seed_ones) {
    Tensor seed(root->value.shape(), 1.0);
    root->grad_buffer();
    root->grad = seed;
  }
  std::vector<Node*> order;
  topo(root, order);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

namespace ops {

Var add(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor out = a->value.clone();
  out.add_inplace(b->value);
  return make("add", std::move(out), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad);
    n.parents[1]->accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "sub");
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = a->value[i] - b->value[i];
  return make("sub", std::move(out), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad);
    if (!n.parents[1]->requires_grad) return;
    Tensor g(n.grad.shape());
    double* p = g.mutable_data();
    for (size_t i = 0; i < g.size(); ++i) p[i] = -n.grad[i];
    n.parents[1]->accumulate(g);
  });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "hadamard");
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = a->value[i] * b->value[i];
  return make("hadamard", std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor g(n.grad.shape());
      double* p = g.mutable_data();
      for (size_t i = 0; i < g.size(); ++i) p[i] = n.grad[i] * bv[i];
      n.parents[0]->accumulate(g);
    }
    if (n.parents[1]->requires_grad) {
      Tensor g(n.grad.shape());
      double* p = g.mutable_data();
      for (size_t i = 0; i < g.size(); ++i) p[i] = n.grad[i] * av[i];
      n.parents[1]->accumulate(g);
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = s * a->value[i];
  return make("scale", std::move(out), {a}, [s](Node& n) {
    Tensor g(n.grad.shape());
    double* p = g.mutable_data();
    for (size_t i = 0; i < g.size(); ++i) p[i] = s * n.grad[i];
    n.parents[0]->accumulate(g);
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = a->value[i] + s;
  return make("add_scalar", std::move(out), {a},
              [](Node& n) { n.parents[0]->accumulate(n.grad); });
}

Var sigmoid(const Var& a) {
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-a->value[i]));
  return make("sigmoid", std::move(out), {a}, [](Node& n) {
    Tensor g(n.grad.shape());
    double* p = g.mutable_data();
    for (size_t i = 0; i < g.size(); ++i) {
      double y = n.value[i];
      p[i] = n.grad[i] * y * (1.0 - y);
    }
    n.parents[0]->accumulate(g);
  });
}

Var relu(const Var& a) {
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
  return make("relu", std::move(out), {a}, [](Node& n) {
    Tensor g(n.grad.shape());
    double* p = g.mutable_data();
    // subgradient at exactly 0 is 0
    for (size_t i = 0; i < g.size(); ++i)
      p[i] = n.parents[0]->value[i] > 0.0 ? n.grad[i] : 0.0;
    n.parents[0]->accumulate(g);
  });
}

Var abs(const Var& a) {
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = std::fabs(a->value[i]);
  return make("abs", std::move(out), {a}, [](Node& n) {
    Tensor g(n.grad.shape());
    double* p = g.mutable_data();
    for (size_t i = 0; i < g.size(); ++i) {
      double x = n.parents[0]->value[i];
      p[i] = x > 0.0 ? n.grad[i] : (x < 0.0 ? -n.grad[i] : 0.0);
    }
    n.parents[0]->accumulate(g);
  });
}

Var softplus(const Var& a) {
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) {
    double z = a->value[i];
    o[i] = std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
  }
  return make("softplus", std::move(out), {a}, [](Node& n) {
    Tensor g(n.grad.shape());
    double* p = g.mutable_data();
    for (size_t i = 0; i < g.size(); ++i) {
      double z = n.parents[0]->value[i];
      double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                          : std::exp(z) / (1.0 + std::exp(z));
      p[i] = n.grad[i] * s;
    }
    n.parents[0]->accumulate(g);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (size_t i = 0; i < a->value.size(); ++i) s += a->value[i];
  return make("sum", Tensor::from({1}, {s}), {a}, [](Node& n) {
    Tensor g(n.parents[0]->value.shape(), n.grad[0]);
    n.parents[0]->accumulate(g);
  });
}

Var add_n(const std::vector<Var>& terms) {
  if (terms.empty()) throw DimensionError("add_n: empty term list");
  Tensor out = terms[0]->value.clone();
  for (size_t k = 1; k < terms.size(); ++k) {
    require_same_shape(out, terms[k]->value, "add_n");
    out.add_inplace(terms[k]->value);
  }
  return make("add_n", std::move(out), terms, [](Node& n) {
    for (auto& p : n.parents) p->accumulate(n.grad);
  });
}

Var dot(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "dot");
  double s = 0.0;
  for (size_t i = 0; i < a->value.size(); ++i) s += a->value[i] * b->value[i];
  return make("dot", Tensor::from({1}, {s}), {a, b}, [](Node& n) {
    double g = n.grad[0];
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor ga(av.shape());
      double* p = ga.mutable_data();
      for (size_t i = 0; i < ga.size(); ++i) p[i] = g * bv[i];
      n.parents[0]->accumulate(ga);
    }
    if (n.parents[1]->requires_grad) {
      Tensor gb(bv.shape());
      double* p = gb.mutable_data();
      for (size_t i = 0; i < gb.size(); ++i) p[i] = g * av[i];
      n.parents[1]->accumulate(gb);
    }
  });
}

Var flatten(const Var& a) {
  Tensor out = a->value.clone();
  Tensor flat = Tensor::from({static_cast<int>(out.size())},
                             std::vector<double>(out.data(), out.data() + out.size()));
  return make("flatten", std::move(flat), {a}, [](Node& n) {
    Tensor g = Tensor::from(n.parents[0]->value.shape(),
                            std::vector<double>(n.grad.data(), n.grad.data() + n.grad.size()));
    n.parents[0]->accumulate(g);
  });
}

Var mul_s(const Var& a, const Var& b) { return hadamard(a, b); }

Var div_s(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "div");
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = a->value[i] / b->value[i];
  return make("div", std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor g(av.shape());
      double* p = g.mutable_data();
      for (size_t i = 0; i < g.size(); ++i) p[i] = n.grad[i] / bv[i];
      n.parents[0]->accumulate(g);
    }
    if (n.parents[1]->requires_grad) {
      Tensor g(bv.shape());
      double* p = g.mutable_data();
      for (size_t i = 0; i < g.size(); ++i)
        p[i] = -n.grad[i] * av[i] / (bv[i] * bv[i]);
      n.parents[1]->accumulate(g);
    }
  });
}

Var sqrt_s(const Var& a) {
  Tensor out(a->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = std::sqrt(a->value[i]);
  return make("sqrt", std::move(out), {a}, [](Node& n) {
    Tensor g(n.grad.shape());
    double* p = g.mutable_data();
    for (size_t i = 0; i < g.size(); ++i) p[i] = n.grad[i] * 0.5 / n.value[i];
    n.parents[0]->accumulate(g);
  });
}

Var affine(const Var& x, const Var& W, const Var& b) {
  if (x->value.rank() != 1 || W->value.rank() != 2 || b->value.rank() != 1 ||
      x->value.dim(0) != W->value.dim(0) || b->value.dim(0) != W->value.dim(1))
    throw DimensionError("affine: incompatible shapes x" + x->value.shape_str() +
                         " W" + W->value.shape_str() + " b" + b->value.shape_str());
  int n = W->value.dim(0), m = W->value.dim(1);
  Tensor out({m});
  double* o = out.mutable_data();
  const double* xv = x->value.data();
  const double* wv = W->value.data();
  for (int j = 0; j < m; ++j) o[j] = b->value[static_cast<size_t>(j)];
  for (int i = 0; i < n; ++i) {
    double xi = xv[i];
    const double* wrow = wv + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) o[j] += xi * wrow[j];
  }
  return make("affine", std::move(out), {x, W, b}, [n, m](Node& nd) {
    const double* g = nd.grad.data();
    const Tensor& xv = nd.parents[0]->value;
    const Tensor& wv = nd.parents[1]->value;
    if (nd.parents[0]->requires_grad) {
      Tensor gx({n});
      double* p = gx.mutable_data();
      for (int i = 0; i < n; ++i) {
        const double* wrow = wv.data() + static_cast<size_t>(i) * m;
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += wrow[j] * g[j];
        p[i] = s;
      }
      nd.parents[0]->accumulate(gx);
    }
    if (nd.parents[1]->requires_grad) {
      Tensor gw({n, m});
      double* p = gw.mutable_data();
      for (int i = 0; i < n; ++i) {
        double xi = xv[static_cast<size_t>(i)];
        for (int j = 0; j < m; ++j) p[static_cast<size_t>(i) * m + j] = xi * g[j];
      }
      nd.parents[1]->accumulate(gw);
    }
    if (nd.parents[2]->requires_grad) {
      Tensor gb({m});
      double* p = gb.mutable_data();
      for (int j = 0; j < m; ++j) p[j] = g[j];
      nd.parents[2]->accumulate(gb);
    }
  });
}

Var map_affine(const Var& x, const Var& W, const Var& b) {
  if (x->value.rank() != 3 || W->value.rank() != 2 ||
      x->value.dim(2) != W->value.dim(0) || b->value.dim(0) != W->value.dim(1))
    throw DimensionError("map_affine: incompatible shapes x" + x->value.shape_str() +
                         " W" + W->value.shape_str());
  int K1 = x->value.dim(0), K2 = x->value.dim(1);
  int ci = W->value.dim(0), co = W->value.dim(1);
  Tensor out({K1, K2, co});
  double* o = out.mutable_data();
  const double* xv = x->value.data();
  const double* wv = W->value.data();
  const double* bv = b->value.data();
  size_t cells = static_cast<size_t>(K1) * K2;
  for (size_t cell = 0; cell < cells; ++cell) {
    const double* xi = xv + cell * ci;
    double* oc = o + cell * co;
    for (int j = 0; j < co; ++j) oc[j] = bv[j];
    for (int i = 0; i < ci; ++i) {
      double v = xi[i];
      const double* wrow = wv + static_cast<size_t>(i) * co;
      for (int j = 0; j < co; ++j) oc[j] += v * wrow[j];
    }
  }
  return make("map_affine", std::move(out), {x, W, b}, [K1, K2, ci, co](Node& nd) {
    size_t cells = static_cast<size_t>(K1) * K2;
    const double* g = nd.grad.data();
    const double* xv = nd.parents[0]->value.data();
    const double* wv = nd.parents[1]->value.data();
    if (nd.parents[0]->requires_grad) {
      Tensor gx({K1, K2, ci});
      double* p = gx.mutable_data();
      for (size_t cell = 0; cell < cells; ++cell) {
        const double* gc = g + cell * co;
        double* pc = p + cell * ci;
        for (int i = 0; i < ci; ++i) {
          const double* wrow = wv + static_cast<size_t>(i) * co;
          double s = 0.0;
          for (int j = 0; j < co; ++j) s += wrow[j] * gc[j];
          pc[i] = s;
        }
      }
      nd.parents[0]->accumulate(gx);
    }
    if (nd.parents[1]->requires_grad) {
      Tensor gw({ci, co});
      double* p = gw.mutable_data();
      for (size_t cell = 0; cell < cells; ++cell) {
        const double* gc = g + cell * co;
        const double* xi = xv + cell * ci;
        for (int i = 0; i < ci; ++i) {
          double v = xi[i];
          double* prow = p + static_cast<size_t>(i) * co;
          for (int j = 0; j < co; ++j) prow[j] += v * gc[j];
        }
      }
      nd.parents[1]->accumulate(gw);
    }
    if (nd.parents[2]->requires_grad) {
      Tensor gb({co});
      double* p = gb.mutable_data();
      for (size_t cell = 0; cell < cells; ++cell) {
        const double* gc = g + cell * co;
        for (int j = 0; j < co; ++j) p[j] += gc[j];
      }
      nd.parents[2]->accumulate(gb);
    }
  });
}

Var concat_channels(const std::vector<Var>& maps) {
  if (maps.empty()) throw DimensionError("concat_channels: empty input");
  int K1 = maps[0]->value.dim(0), K2 = maps[0]->value.dim(1);
  int ctotal = 0;
  std::vector<int> widths;
  for (const auto& m : maps) {
    if (m->value.rank() != 3 || m->value.dim(0) != K1 || m->value.dim(1) != K2)
      throw DimensionError("concat_channels: spatial shape mismatch");
    widths.push_back(m->value.dim(2));
    ctotal += m->value.dim(2);
  }
  Tensor out({K1, K2, ctotal});
  double* o = out.mutable_data();
  size_t cells = static_cast<size_t>(K1) * K2;
  for (size_t cell = 0; cell < cells; ++cell) {
    double* oc = o + cell * ctotal;
    for (size_t mi = 0; mi < maps.size(); ++mi) {
      const double* src = maps[mi]->value.data() + cell * widths[mi];
      for (int c = 0; c < widths[mi]; ++c) *oc++ = src[c];
    }
  }
  return make("concat_channels", std::move(out), maps,
              [K1, K2, ctotal, widths](Node& nd) {
                size_t cells = static_cast<size_t>(K1) * K2;
                const double* g = nd.grad.data();
                for (size_t mi = 0; mi < nd.parents.size(); ++mi) {
                  if (!nd.parents[mi]->requires_grad) continue;
                  int off = 0;
                  for (size_t k = 0; k < mi; ++k) off += widths[k];
                  Tensor gm({K1, K2, widths[mi]});
                  double* p = gm.mutable_data();
                  for (size_t cell = 0; cell < cells; ++cell) {
                    const double* gc = g + cell * ctotal + off;
                    double* pc = p + cell * widths[mi];
                    for (int c = 0; c < widths[mi]; ++c) pc[c] = gc[c];
                  }
                  nd.parents[mi]->accumulate(gm);
                }
              });
}

Var l2_normalize(const Var& x, bool* degenerate) {
  double r2 = 0.0;
  for (size_t i = 0; i < x->value.size(); ++i) r2 += x->value[i] * x->value[i];
  double r = std::sqrt(r2);
  bool degen = r < 1e-12;
  if (degenerate) *degenerate = degen;
  if (degen) {
    Tensor out = x->value.clone();
    return make("l2_normalize", std::move(out), {x},
                [](Node& n) { n.parents[0]->accumulate(n.grad); });
  }
  Tensor out(x->value.shape());
  double* o = out.mutable_data();
  for (size_t i = 0; i < out.size(); ++i) o[i] = x->value[i] / r;
  return make("l2_normalize", std::move(out), {x}, [r](Node& n) {
    // d/dx (x/r) = (I - y y^T)/r
    double yg = 0.0;
    for (size_t i = 0; i < n.grad.size(); ++i) yg += n.value[i] * n.grad[i];
    Tensor g(n.grad.shape());
    double* p = g.mutable_data();
    for (size_t i = 0; i < g.size(); ++i)
      p[i] = (n.grad[i] - n.value[i] * yg) / r;
    n.parents[0]->accumulate(g);
  });
}

Var conv2d(const Var& x, const Var& W, const Var& b, int stride) {
  if (x->value.rank() != 3 || W->value.rank() != 4)
    throw DimensionError("conv2d: x must be rank 3, W rank 4");
  int H = x->value.dim(0), Wd = x->value.dim(1), ci = x->value.dim(2);
  int kh = W->value.dim(0), kw = W->value.dim(1);
  if (kh % 2 == 0 || kw % 2 == 0)
    throw DimensionError("conv2d: even kernel sizes unsupported");
  if (W->value.dim(2) != ci || b->value.dim(0) != W->value.dim(3))
    throw DimensionError("conv2d: channel mismatch x" + x->value.shape_str() +
                         " W" + W->value.shape_str());
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  int co = W->value.dim(3);
  int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  int Ho = (H + 2 * ph - kh) / stride + 1;
  int Wo = (Wd + 2 * pw - kw) / stride + 1;
  Tensor out({Ho, Wo, co});
  double* o = out.mutable_data();
  const double* xv = x->value.data();
  const double* wv = W->value.data();
  const double* bv = b->value.data();
  for (int oi = 0; oi < Ho; ++oi)
    for (int oj = 0; oj < Wo; ++oj) {
      double* oc = o + (static_cast<size_t>(oi) * Wo + oj) * co;
      for (int c = 0; c < co; ++c) oc[c] = bv[c];
      for (int di = 0; di < kh; ++di) {
        int ii = oi * stride + di - ph;
        if (ii < 0 || ii >= H) continue;
        for (int dj = 0; dj < kw; ++dj) {
          int jj = oj * stride + dj - pw;
          if (jj < 0 || jj >= Wd) continue;
          const double* xc = xv + (static_cast<size_t>(ii) * Wd + jj) * ci;
          const double* wc = wv + ((static_cast<size_t>(di) * kw + dj) * ci) * co;
          for (int c = 0; c < ci; ++c) {
            double v = xc[c];
            const double* wrow = wc + static_cast<size_t>(c) * co;
            for (int cc = 0; cc < co; ++cc) oc[cc] += v * wrow[cc];
          }
        }
      }
    }
  return make("conv2d", std::move(out), {x, W, b},
              [H, Wd, ci, kh, kw, co, ph, pw, stride, Ho, Wo](Node& nd) {
                const double* g = nd.grad.data();
                const double* xv = nd.parents[0]->value.data();
                const double* wv = nd.parents[1]->value.data();
                Tensor gx({H, Wd, ci});
                Tensor gw({kh, kw, ci, co});
                Tensor gb({co});
                double* pgx = gx.mutable_data();
                double* pgw = gw.mutable_data();
                double* pgb = gb.mutable_data();
                for (int oi = 0; oi < Ho; ++oi)
                  for (int oj = 0; oj < Wo; ++oj) {
                    const double* gc = g + (static_cast<size_t>(oi) * Wo + oj) * co;
                    for (int c = 0; c < co; ++c) pgb[c] += gc[c];
                    for (int di = 0; di < kh; ++di) {
                      int ii = oi * stride + di - ph;
                      if (ii < 0 || ii >= H) continue;
                      for (int dj = 0; dj < kw; ++dj) {
                        int jj = oj * stride + dj - pw;
                        if (jj < 0 || jj >= Wd) continue;
                        size_t xoff = (static_cast<size_t>(ii) * Wd + jj) * ci;
                        size_t woff = (static_cast<size_t>(di) * kw + dj) * ci * co;
                        for (int c = 0; c < ci; ++c) {
                          const double* wrow = wv + woff + static_cast<size_t>(c) * co;
                          double* gwrow = pgw + woff + static_cast<size_t>(c) * co;
                          double xval = xv[xoff + c];
                          double s = 0.0;
                          for (int cc = 0; cc < co; ++cc) {
                            s += wrow[cc] * gc[cc];
                            gwrow[cc] += xval * gc[cc];
                          }
                          pgx[xoff + c] += s;
                        }
                      }
                    }
                  }
                if (nd.parents[0]->requires_grad) nd.parents[0]->accumulate(gx);
                if (nd.parents[1]->requires_grad) nd.parents[1]->accumulate(gw);
                if (nd.parents[2]->requires_grad) nd.parents[2]->accumulate(gb);
              });
}

Var dropout(const Var& x, const Tensor& mask) {
  require_same_shape(x->value, mask, "dropout");
  return hadamard(x, constant(mask.clone()));
}

Tensor make_dropout_mask(const std::vector<int>& shape, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw DimensionError("dropout probability must be in [0, 1)");
  Tensor mask(shape);
  double keep_scale = 1.0 / (1.0 - p);
  double* m = mask.mutable_data();
  for (size_t i = 0; i < mask.size(); ++i)
    m[i] = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

Var cosine(const Var& a, const Var& b) {
  Var na = sqrt_s(dot(a, a));
  Var nb = sqrt_s(dot(b, b));
  return div_s(dot(a, b), mul_s(na, nb));
}

}  // namespace ops

}  // namespace migate
