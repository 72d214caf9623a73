#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "migate/eval.hpp"

using namespace migate;
namespace fs = std::filesystem;

namespace {

// reference ranking: descending score, ties by gallery index
std::vector<size_t> reference_order(const Tensor& S, int probe) {
  int g = S.dim(1);
  std::vector<size_t> order(static_cast<size_t>(g));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return S[S.idx2(probe, static_cast<int>(a))] >
           S[S.idx2(probe, static_cast<int>(b))];
  });
  return order;
}

CMCCurve reference_cmc(const ScoreMatrix& s) {
  int p = s.scores.dim(0), g = s.scores.dim(1);
  CMCCurve c;
  c.rates.assign(static_cast<size_t>(g), 0.0);
  for (int i = 0; i < p; ++i) {
    auto order = reference_order(s.scores, i);
    for (size_t r = 0; r < order.size(); ++r)
      if (s.gallery_ids[order[r]] == s.probe_ids[static_cast<size_t>(i)]) {
        for (size_t k = r; k < c.rates.size(); ++k) c.rates[k] += 1.0;
        break;
      }
  }
  for (double& v : c.rates) v /= p;
  return c;
}

double reference_map(const ScoreMatrix& s) {
  int p = s.scores.dim(0);
  double total = 0.0;
  for (int i = 0; i < p; ++i) {
    auto order = reference_order(s.scores, i);
    int hits = 0, relevant = 0;
    double ap = 0.0;
    for (size_t r = 0; r < order.size(); ++r)
      if (s.gallery_ids[order[r]] == s.probe_ids[static_cast<size_t>(i)])
        ++relevant;
    for (size_t r = 0; r < order.size(); ++r)
      if (s.gallery_ids[order[r]] == s.probe_ids[static_cast<size_t>(i)]) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    total += ap / relevant;
  }
  return total / p;
}

ScoreMatrix random_single_shot(int ids, Rng& rng) {
  ScoreMatrix s;
  s.scores = Tensor({ids, ids});
  for (size_t i = 0; i < s.scores.size(); ++i)
    s.scores.set(i, rng.uniform(-1.0, 1.0));
  s.probe_ids.resize(static_cast<size_t>(ids));
  s.gallery_ids.resize(static_cast<size_t>(ids));
  std::iota(s.probe_ids.begin(), s.probe_ids.end(), 0);
  std::iota(s.gallery_ids.begin(), s.gallery_ids.end(), 0);
  return s;
}

}  // namespace

TEST_CASE("cmc on a hand-worked 3x3 single-shot case") {
  ScoreMatrix s;
  s.scores = Tensor::from({3, 3}, {0.9, 0.1, 0.5,    // probe 0: correct first
                                   0.8, 0.2, 0.6,    // probe 1: correct third
                                   0.3, 0.4, 0.35}); // probe 2: correct second
  s.probe_ids = {0, 1, 2};
  s.gallery_ids = {0, 1, 2};
  CMCCurve c = cmc_single_shot(s);
  REQUIRE(c.rates.size() == 3);
  CHECK(c.rates[0] == doctest::Approx(1.0 / 3));
  CHECK(c.rates[1] == doctest::Approx(2.0 / 3));
  CHECK(c.rates[2] == doctest::Approx(1.0));
  // AP per probe: 1, 1/3, 1/2
  CHECK(mean_average_precision(s) ==
        doctest::Approx((1.0 + 1.0 / 3 + 0.5) / 3).epsilon(1e-12));
}

TEST_CASE("score ties are broken by gallery index") {
  ScoreMatrix s;
  s.scores = Tensor({2, 2}, 0.5);  // all tied
  s.probe_ids = {0, 1};
  s.gallery_ids = {0, 1};
  CMCCurve c = cmc_single_shot(s);
  // probe 0 finds identity 0 at rank 1; probe 1 finds identity 1 at rank 2
  CHECK(c.rates[0] == doctest::Approx(0.5));
  CHECK(c.rates[1] == doctest::Approx(1.0));
}

TEST_CASE("cmc and map match brute-force oracles on 200 random matrices") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreMatrix s = random_single_shot(10, rng);
    CMCCurve mine = cmc_single_shot(s);
    CMCCurve ref = reference_cmc(s);
    REQUIRE(mine.rates.size() == ref.rates.size());
    for (size_t r = 0; r < ref.rates.size(); ++r)
      CHECK(mine.rates[r] == doctest::Approx(ref.rates[r]).epsilon(1e-12));
    CHECK(mean_average_precision(s) ==
          doctest::Approx(reference_map(s)).epsilon(1e-12));
  }
}

TEST_CASE("cmc curves are monotone and end at 1") {
  Rng rng(8);
  ScoreMatrix s = random_single_shot(12, rng);
  CMCCurve c = cmc_single_shot(s);
  for (size_t r = 1; r < c.rates.size(); ++r) CHECK(c.rates[r] >= c.rates[r - 1]);
  CHECK(c.rates.back() == doctest::Approx(1.0));
}

TEST_CASE("metrics are invariant under strictly increasing score transforms") {
  Rng rng(9);
  ScoreMatrix s = random_single_shot(10, rng);
  ScoreMatrix t = s;
  t.scores = s.scores.clone();
  for (size_t i = 0; i < t.scores.size(); ++i)
    t.scores.set(i, std::tanh(3.0 * s.scores[i]) + 5.0);
  CMCCurve a = cmc_single_shot(s), b = cmc_single_shot(t);
  for (size_t r = 0; r < a.rates.size(); ++r)
    CHECK(a.rates[r] == b.rates[r]);
  CHECK(mean_average_precision(s) ==
        doctest::Approx(mean_average_precision(t)).epsilon(1e-12));
}

TEST_CASE("multi-shot galleries are legal for map but not single-shot cmc") {
  ScoreMatrix s;
  s.scores = Tensor::from({1, 3}, {0.9, 0.8, 0.7});
  s.probe_ids = {0};
  s.gallery_ids = {0, 0, 1};  // identity 0 twice
  // AP with relevant at ranks 1 and 2: (1/1 + 2/2) / 2 = 1
  CHECK(mean_average_precision(s) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cmc_single_shot(s), DimensionError);
}

TEST_CASE("score matrix validation catches label-list mismatches") {
  ScoreMatrix s;
  s.scores = Tensor({2, 3});
  s.probe_ids = {0, 1};
  s.gallery_ids = {0, 1};  // should have 3 entries
  CHECK_THROWS_AS(s.validate(), DimensionError);
}

TEST_CASE("score matrices round-trip through the binary format") {
  Rng rng(10);
  ScoreMatrix s = random_single_shot(6, rng);
  s.probe_ids = {4, 2, 0, 1, 3, 5};
  fs::path path = fs::temp_directory_path() / "migate_scores_test.bin";
  save_score_matrix(s, path.string());
  ScoreMatrix back = load_score_matrix(path.string());
  CHECK(back.probe_ids == s.probe_ids);
  CHECK(back.gallery_ids == s.gallery_ids);
  for (size_t i = 0; i < s.scores.size(); ++i)
    CHECK(back.scores[i] == s.scores[i]);
  fs::remove(path);
}

TEST_CASE("region similarity is the W-weighted squared distance") {
  Tensor xa = Tensor::from({2}, {1.0, 2.0});
  Tensor xb = Tensor::from({2}, {0.0, 4.0});
  // W = diag(2, 0.5): d = (1, -2), d^T W d = 2*1 + 0.5*4 = 4
  Tensor W = Tensor::from({2, 2}, {2.0, 0.0, 0.0, 0.5});
  CHECK(region_similarity(xa, xb, W) == doctest::Approx(4.0).epsilon(1e-14));
  // symmetric in its arguments
  CHECK(region_similarity(xb, xa, W) ==
        doctest::Approx(region_similarity(xa, xb, W)));
  // identity metric reduces to the squared euclidean distance
  Tensor I = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
  CHECK(region_similarity(xa, xb, I) == doctest::Approx(5.0));
}

TEST_CASE("region similarity rejects non-psd and asymmetric metrics") {
  Tensor xa = Tensor::from({2}, {1.0, 0.0});
  Tensor xb = Tensor::from({2}, {0.0, 1.0});
  Tensor neg = Tensor::from({2, 2}, {1.0, 0.0, 0.0, -1.0});
  CHECK_THROWS_AS(region_similarity(xa, xb, neg), NumericError);
  Tensor asym = Tensor::from({2, 2}, {1.0, 0.7, 0.2, 1.0});
  CHECK_THROWS_AS(region_similarity(xa, xb, asym), NumericError);
  // a PSD (rank-deficient) metric is accepted thanks to the jitter
  Tensor psd = Tensor::from({2, 2}, {1.0, 1.0, 1.0, 1.0});
  CHECK(region_similarity(xa, xb, psd) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("integrated local similarity sums its regions") {
  Tensor I = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
  std::vector<Region> regions;
  regions.push_back({Tensor::from({2}, {1.0, 0.0}), Tensor::from({2}, {0.0, 0.0}), I});
  regions.push_back({Tensor::from({2}, {0.0, 3.0}), Tensor::from({2}, {0.0, 0.0}), I});
  CHECK(integrated_local_similarity(regions) == doctest::Approx(1.0 + 9.0));
}
