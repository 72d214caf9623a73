#pragma once

#include "migate/dataset.hpp"
#include "migate/model.hpp"

namespace migate {

struct ScoreMatrix {
  Tensor scores;  // {probes, gallery}; higher = more similar
  std::vector<int> probe_ids;
  std::vector<int> gallery_ids;

  void validate() const;  // dimension / label-list agreement
};

// "MISM" binary export: magic, u16 version, u32 probes, u32 gallery,
// u8 precision tag, row-major scores, then the two identity lists.
void save_score_matrix(const ScoreMatrix& s, const std::string& path);
ScoreMatrix load_score_matrix(const std::string& path);

struct CMCCurve {
  std::vector<double> rates;  // index r-1 holds the rank-r recognition rate
};

// Single-shot protocol: each probe identity appears exactly once in the
// gallery. Ranking is by descending score, ties broken by gallery index.
CMCCurve cmc_single_shot(const ScoreMatrix& s);

// Mean over probes of the average precision of the ranked gallery list;
// multi-shot galleries allowed.
double mean_average_precision(const ScoreMatrix& s);

// (xa - xb)^T W (xa - xb); W must be symmetric positive semidefinite
// (validated by a jittered Cholesky factorization).
double region_similarity(const Tensor& xa, const Tensor& xb, const Tensor& Wr);

struct Region {
  Tensor xa, xb, Wr;
};
double integrated_local_similarity(const std::vector<Region>& regions);

// Cross-camera scores: every probe against every gallery image, activation
// maps computed once per image, probes scored in parallel.
ScoreMatrix score_images(const ModelParams& params,
                         const std::vector<double>& channel_mean,
                         const std::vector<const Sample*>& probes,
                         const std::vector<const Sample*>& gallery);

// Seed loop over the single-shot protocol: per trial, one random gallery
// image per identity from one camera, all images of the other camera as
// probes.
struct EvalReport {
  std::vector<CMCCurve> trial_cmc;
  std::vector<double> trial_map;
  CMCCurve mean_cmc;
  std::vector<double> std_cmc;
  double mean_map = 0.0;
  double std_map = 0.0;
};

EvalReport evaluate_model(const ModelParams& params,
                          const std::vector<double>& channel_mean,
                          const Dataset& test_set, int trials, uint64_t seed,
                          int probe_camera = 0);

std::string cmc_table(const EvalReport& r);        // rank, per-trial, mean
std::string metrics_records(const EvalReport& r);  // line-delimited

}  // namespace migate
