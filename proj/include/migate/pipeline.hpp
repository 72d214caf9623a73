#pragma once

#include "migate/dataset.hpp"
#include "migate/model.hpp"

namespace migate {

struct PairBatch {
  std::vector<size_t> indices;  // into the dataset's sample list
  Supervision sup;
};

// Draws `batch_size` images without replacement and builds M / W from the
// identity labels; redraws when a batch has no positive or no negative pair.
PairBatch sample_batch(const Dataset& ds, int batch_size, Rng& rng);

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  int epochs = 50;
  int batch_size = 128;
  int patience = 5;        // early stop: epochs without val improvement
  double lr_decay = 0.1;   // plateau decay factor
  int lr_patience = 3;     // epochs without improvement before decay
  uint64_t seed = 1;
  double train_frac = 0.625;
  double val_frac = 0.125;
  bool augment = true;
  LossConfig loss;
};

// v <- momentum v - lr g; theta <- theta + v. Aborts on non-finite grads.
struct SgdState {
  std::vector<Tensor> velocity;  // aligned with named_params order
};
void sgd_step(std::vector<std::pair<std::string, Tensor*>> params,
              const std::vector<Tensor>& grads, SgdState& state, double lr,
              double momentum);

// Loss over all off-diagonal within-batch pairs plus its gradient w.r.t.
// every trainable parameter (aligned with named_params order). Pair-level
// work is parallel; accumulation order is fixed by pair index.
struct BatchResult {
  double loss = 0.0;
  std::vector<Tensor> grads;  // empty when compute_grads is false
};
BatchResult batch_pass(const ModelParams& model,
                       const std::vector<const Sample*>& images,
                       const Supervision& sup,
                       const std::vector<double>& channel_mean,
                       const LossConfig& loss_cfg, bool training,
                       uint64_t dropout_seed, bool compute_grads);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelParams best;
  SgdState best_opt;
  std::vector<double> channel_mean;
  std::vector<EpochMetrics> log;
  int best_epoch = -1;
  double best_val = 0.0;
  bool diverged = false;
};

// Optional warm start resumes bit-identically: batch order and dropout are
// pure functions of (seed, epoch).
struct WarmStart {
  ModelParams params;
  SgdState opt;
  int start_epoch = 0;
};

TrainResult train(const ModelConfig& model_cfg, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& cfg,
                  const WarmStart* warm = nullptr,
                  std::ostream* log_stream = nullptr);

}  // namespace migate
