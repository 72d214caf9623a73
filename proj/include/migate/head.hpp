#pragma once

#include "migate/autograd.hpp"

namespace migate {

struct HeadParams {
  int in_dim = 0;
  int embed_dim = 0;  // E
  Tensor W_fc;        // {in_dim, E}
  Tensor b_fc;        // {E}
  static HeadParams init(int in_dim, int embed_dim, Rng& rng);
  size_t param_count() const;
};

struct HeadLeaves {
  Var W_fc, b_fc;
  static HeadLeaves from(const HeadParams& p, bool trainable = true);
};

// e = normalize(W_fc^T flatten(|g - context|) + b_fc). `g` and `context`
// must share a shape (a K x K x D map, or an already-pooled vector). A zero
// pre-normalization vector is left unnormalized and flagged.
Var residual_embed(const Var& g, const Var& context, const HeadLeaves& head,
                   bool* degenerate = nullptr);

// Pairwise supervision over a batch of n images: M in {+1,-1}, W weights
// each class to unit total. Scored pairs are the off-diagonal ordered
// entries; the diagonal carries the conventional +1 / (1/n1) values but is
// not summed in the loss (an image is not evidence against itself).
struct Supervision {
  int n = 0;
  Tensor M;  // {n, n}
  Tensor W;  // {n, n}
  long n_pos = 0;  // off-diagonal entries with M = +1
  long n_neg = 0;

  // throws NumericError when a class is empty (weighting undefined)
  static Supervision from_labels(const std::vector<int>& identities);
};

struct LossConfig {
  double alpha = 2.0;
  double beta = 0.5;
};

// single entry: w * softplus(-alpha (s - beta) m)
double deviance_term(double s, double m, double w, const LossConfig& cfg);

// L = sum over off-diagonal (i,j) of W[i][j] softplus(-alpha(S-beta)M).
double binomial_deviance_loss(const Tensor& S, const Supervision& sup,
                              const LossConfig& cfg);

// hand-derived dL/dS = -W alpha M sigmoid(-alpha(S-beta)M), off-diagonal
Tensor binomial_deviance_loss_grad(const Tensor& S, const Supervision& sup,
                                   const LossConfig& cfg);

// graph form over score vars (row-major n*n; diagonal entries may be null)
Var binomial_deviance_loss_graph(const std::vector<Var>& scores,
                                 const Supervision& sup,
                                 const LossConfig& cfg);

// S[i][j] = <a_i, b_j> / (|a_i||b_j|); throws NumericError naming the index
// of any zero vector
Tensor cosine_similarity_matrix(const std::vector<Tensor>& emb_a,
                                const std::vector<Tensor>& emb_b);

}  // namespace migate
