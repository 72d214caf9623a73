#include "migate/head.hpp"

#include <cmath>

namespace migate {

HeadParams HeadParams::init(int in_dim, int embed_dim, Rng& rng) {
  if (embed_dim < 2) throw DimensionError("head embedding dim must be >= 2");
  if (in_dim < 1) throw DimensionError("head input dim must be >= 1");
  HeadParams p;
  p.in_dim = in_dim;
  p.embed_dim = embed_dim;
  p.W_fc = Tensor({in_dim, embed_dim});
  double bound = std::sqrt(6.0 / (in_dim + embed_dim));
  double* w = p.W_fc.mutable_data();
  for (size_t i = 0; i < p.W_fc.size(); ++i) w[i] = rng.uniform(-bound, bound);
  p.W_fc.quantize();
  p.b_fc = Tensor({embed_dim});
  return p;
}

size_t HeadParams::param_count() const { return W_fc.size() + b_fc.size(); }

HeadLeaves HeadLeaves::from(const HeadParams& p, bool trainable) {
  auto wrap = [trainable](const Tensor& t) {
    return trainable ? leaf(t) : constant(t);
  };
  return {wrap(p.W_fc), wrap(p.b_fc)};
}

Var residual_embed(const Var& g, const Var& context, const HeadLeaves& head,
                   bool* degenerate) {
  require_same_shape(g->value, context->value, "residual_embed");
  using namespace ops;
  Var residual = flatten(abs(sub(g, context)));
  if (residual->value.dim(0) != head.W_fc->value.dim(0))
    throw DimensionError("residual_embed: flattened residual " +
                         residual->value.shape_str() + " vs W_fc " +
                         head.W_fc->value.shape_str());
  return l2_normalize(affine(residual, head.W_fc, head.b_fc), degenerate);
}

Supervision Supervision::from_labels(const std::vector<int>& identities) {
  int n = static_cast<int>(identities.size());
  if (n < 2) throw DimensionError("supervision needs at least 2 images");
  Supervision sup;
  sup.n = n;
  sup.M = Tensor({n, n});
  sup.W = Tensor({n, n});
  double* m = sup.M.mutable_data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      bool pos = identities[i] == identities[j];
      m[static_cast<size_t>(i) * n + j] = pos ? 1.0 : -1.0;
      if (i != j) (pos ? sup.n_pos : sup.n_neg) += 1;
    }
  if (sup.n_pos == 0 || sup.n_neg == 0)
    throw NumericError("batch has " + std::to_string(sup.n_pos) +
                       " positive and " + std::to_string(sup.n_neg) +
                       " negative pairs; weighting undefined");
  double* w = sup.W.mutable_data();
  for (size_t k = 0; k < sup.W.size(); ++k)
    w[k] = sup.M[k] > 0.0 ? 1.0 / sup.n_pos : 1.0 / sup.n_neg;
  return sup;
}

namespace {
double softplus_stable(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}
}  // namespace

double deviance_term(double s, double m, double w, const LossConfig& cfg) {
  return w * softplus_stable(-cfg.alpha * (s - cfg.beta) * m);
}

double binomial_deviance_loss(const Tensor& S, const Supervision& sup,
                              const LossConfig& cfg) {
  if (S.rank() != 2 || S.dim(0) != sup.n || S.dim(1) != sup.n)
    throw DimensionError("loss: score matrix " + S.shape_str() +
                         " vs supervision n = " + std::to_string(sup.n));
  double loss = 0.0;
  for (int i = 0; i < sup.n; ++i)
    for (int j = 0; j < sup.n; ++j) {
      if (i == j) continue;
      size_t k = static_cast<size_t>(i) * sup.n + j;
      loss += deviance_term(S[k], sup.M[k], sup.W[k], cfg);
    }
  return loss;
}

Tensor binomial_deviance_loss_grad(const Tensor& S, const Supervision& sup,
                                   const LossConfig& cfg) {
  Tensor g({sup.n, sup.n});
  double* p = g.mutable_data();
  for (int i = 0; i < sup.n; ++i)
    for (int j = 0; j < sup.n; ++j) {
      if (i == j) continue;
      size_t k = static_cast<size_t>(i) * sup.n + j;
      double z = -cfg.alpha * (S[k] - cfg.beta) * sup.M[k];
      double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                            : std::exp(z) / (1.0 + std::exp(z));
      p[k] = -sup.W[k] * cfg.alpha * sup.M[k] * sig;
    }
  return g;
}

Var binomial_deviance_loss_graph(const std::vector<Var>& scores,
                                 const Supervision& sup,
                                 const LossConfig& cfg) {
  if (scores.size() != static_cast<size_t>(sup.n) * sup.n)
    throw DimensionError("loss graph: expected " +
                         std::to_string(static_cast<size_t>(sup.n) * sup.n) +
                         " score vars, got " + std::to_string(scores.size()));
  using namespace ops;
  std::vector<Var> terms;
  terms.reserve(scores.size());
  for (int i = 0; i < sup.n; ++i)
    for (int j = 0; j < sup.n; ++j) {
      if (i == j) continue;
      size_t k = static_cast<size_t>(i) * sup.n + j;
      if (!scores[k]) throw DimensionError("loss graph: missing score var");
      Var z = scale(add_scalar(scores[k], -cfg.beta), -cfg.alpha * sup.M[k]);
      terms.push_back(scale(softplus(z), sup.W[k]));
    }
  return add_n(terms);
}

Tensor cosine_similarity_matrix(const std::vector<Tensor>& emb_a,
                                const std::vector<Tensor>& emb_b) {
  int na = static_cast<int>(emb_a.size());
  int nb = static_cast<int>(emb_b.size());
  if (na == 0 || nb == 0)
    throw DimensionError("cosine_similarity_matrix: empty embedding list");
  auto norm_of = [](const std::vector<Tensor>& v, int idx, const char* side) {
    double r2 = 0.0;
    for (size_t k = 0; k < v[idx].size(); ++k) r2 += v[idx][k] * v[idx][k];
    double r = std::sqrt(r2);
    if (r < 1e-300)
      throw NumericError(std::string("cosine_similarity_matrix: zero vector at ") +
                         side + " index " + std::to_string(idx));
    return r;
  };
  std::vector<double> norm_a(na), norm_b(nb);
  for (int i = 0; i < na; ++i) {
    require_same_shape(emb_a[i], emb_a[0], "cosine_similarity_matrix");
    norm_a[i] = norm_of(emb_a, i, "probe");
  }
  for (int j = 0; j < nb; ++j) {
    require_same_shape(emb_b[j], emb_a[0], "cosine_similarity_matrix");
    norm_b[j] = norm_of(emb_b, j, "gallery");
  }
  Tensor S({na, nb});
  double* s = S.mutable_data();
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      double d = 0.0;
      for (size_t k = 0; k < emb_a[i].size(); ++k)
        d += emb_a[i][k] * emb_b[j][k];
      s[static_cast<size_t>(i) * nb + j] = d / (norm_a[i] * norm_b[j]);
    }
  return S;
}

}  // namespace migate
