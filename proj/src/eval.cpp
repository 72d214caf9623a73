#include "migate/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "migate/io.hpp"
#include "migate/threads.hpp"

namespace migate {

namespace {
constexpr uint16_t kScoreVersion = 1;
}

void ScoreMatrix::validate() const {
  if (scores.rank() != 2)
    throw DimensionError("score matrix must be 2-D, got " + scores.shape_str());
  if (scores.dim(0) != static_cast<int>(probe_ids.size()) ||
      scores.dim(1) != static_cast<int>(gallery_ids.size()))
    throw DimensionError("score matrix " + scores.shape_str() +
                         " does not match label lists (" +
                         std::to_string(probe_ids.size()) + " probes, " +
                         std::to_string(gallery_ids.size()) + " gallery)");
}

void save_score_matrix(const ScoreMatrix& s, const std::string& path) {
  s.validate();
  auto os = io::open_out(path);
  os.write("MISM", 4);
  io::write_u16(os, kScoreVersion);
  io::write_u32(os, static_cast<uint32_t>(s.scores.dim(0)));
  io::write_u32(os, static_cast<uint32_t>(s.scores.dim(1)));
  uint8_t tag = io::precision_tag();
  io::write_u8(os, tag);
  io::write_values(os, s.scores, tag);
  for (int id : s.probe_ids) io::write_u32(os, static_cast<uint32_t>(id));
  for (int id : s.gallery_ids) io::write_u32(os, static_cast<uint32_t>(id));
  if (!os) throw IoError("write failed for '" + path + "'");
}

ScoreMatrix load_score_matrix(const std::string& path) {
  auto is = io::open_in(path);
  io::expect_magic(is, "MISM", "score matrix");
  uint16_t ver = io::read_u16(is, "score matrix version");
  if (ver != kScoreVersion)
    throw VersionError("score matrix version " + std::to_string(ver) +
                       ", expected " + std::to_string(kScoreVersion));
  int p = static_cast<int>(io::read_u32(is, "probe count"));
  int g = static_cast<int>(io::read_u32(is, "gallery count"));
  uint8_t tag = io::read_u8(is, "score matrix precision tag");
  ScoreMatrix s;
  s.scores = Tensor({p, g});
  io::read_values(is, s.scores, tag, "score payload");
  for (int i = 0; i < p; ++i)
    s.probe_ids.push_back(static_cast<int>(io::read_u32(is, "probe ids")));
  for (int i = 0; i < g; ++i)
    s.gallery_ids.push_back(static_cast<int>(io::read_u32(is, "gallery ids")));
  s.validate();
  return s;
}

namespace {

// gallery order for one probe: descending score, ties by gallery index
std::vector<int> ranked_gallery(const ScoreMatrix& s, int probe) {
  int g = s.scores.dim(1);
  std::vector<int> order(static_cast<size_t>(g));
  std::iota(order.begin(), order.end(), 0);
  const double* row = s.scores.data() + static_cast<size_t>(probe) * g;
  std::sort(order.begin(), order.end(), [row](int a, int b) {
    if (row[a] != row[b]) return row[a] > row[b];
    return a < b;
  });
  return order;
}

}  // namespace

CMCCurve cmc_single_shot(const ScoreMatrix& s) {
  s.validate();
  int p = s.scores.dim(0), g = s.scores.dim(1);
  std::map<int, int> gallery_count;
  for (int id : s.gallery_ids) gallery_count[id]++;
  std::vector<int> hits(static_cast<size_t>(g), 0);
  for (int i = 0; i < p; ++i) {
    auto it = gallery_count.find(s.probe_ids[static_cast<size_t>(i)]);
    if (it == gallery_count.end())
      throw DimensionError("probe identity " +
                           std::to_string(s.probe_ids[static_cast<size_t>(i)]) +
                           " absent from gallery");
    if (it->second != 1)
      throw DimensionError("single-shot gallery has " +
                           std::to_string(it->second) + " entries for identity " +
                           std::to_string(it->first));
    auto order = ranked_gallery(s, i);
    for (int r = 0; r < g; ++r)
      if (s.gallery_ids[static_cast<size_t>(order[static_cast<size_t>(r)])] ==
          s.probe_ids[static_cast<size_t>(i)]) {
        hits[static_cast<size_t>(r)]++;
        break;
      }
  }
  CMCCurve c;
  c.rates.resize(static_cast<size_t>(g));
  int cum = 0;
  for (int r = 0; r < g; ++r) {
    cum += hits[static_cast<size_t>(r)];
    c.rates[static_cast<size_t>(r)] = static_cast<double>(cum) / p;
  }
  return c;
}

double mean_average_precision(const ScoreMatrix& s) {
  s.validate();
  int p = s.scores.dim(0), g = s.scores.dim(1);
  double total = 0.0;
  for (int i = 0; i < p; ++i) {
    auto order = ranked_gallery(s, i);
    int relevant = 0;
    double ap = 0.0;
    for (int r = 0; r < g; ++r) {
      if (s.gallery_ids[static_cast<size_t>(order[static_cast<size_t>(r)])] ==
          s.probe_ids[static_cast<size_t>(i)]) {
        ++relevant;
        ap += static_cast<double>(relevant) / (r + 1);
      }
    }
    if (relevant == 0)
      throw DimensionError("probe identity " +
                           std::to_string(s.probe_ids[static_cast<size_t>(i)]) +
                           " has no gallery match");
    total += ap / relevant;
  }
  return total / p;
}

namespace {

// symmetric PSD check via Cholesky with a small diagonal jitter
void require_psd(const Tensor& W) {
  if (W.rank() != 2 || W.dim(0) != W.dim(1))
    throw DimensionError("region metric must be square, got " + W.shape_str());
  int n = W.dim(0);
  const double* w = W.data();
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double d = std::abs(w[static_cast<size_t>(i) * n + j] -
                          w[static_cast<size_t>(j) * n + i]);
      scale = std::max(scale, std::abs(w[static_cast<size_t>(i) * n + j]));
      if (d > 1e-9 * std::max(1.0, scale))
        throw NumericError("region metric is not symmetric");
    }
  double jitter = 1e-9 * std::max(1.0, scale);
  std::vector<double> L(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = w[static_cast<size_t>(i) * n + j] + (i == j ? jitter : 0.0);
      for (int k = 0; k < j; ++k)
        sum -= L[static_cast<size_t>(i) * n + k] *
               L[static_cast<size_t>(j) * n + k];
      if (i == j) {
        if (sum <= 0.0)
          throw NumericError("region metric is not positive semidefinite");
        L[static_cast<size_t>(i) * n + j] = std::sqrt(sum);
      } else {
        L[static_cast<size_t>(i) * n + j] =
            sum / L[static_cast<size_t>(j) * n + j];
      }
    }
  }
}

}  // namespace

double region_similarity(const Tensor& xa, const Tensor& xb, const Tensor& Wr) {
  require_same_shape(xa, xb, "region_similarity");
  if (Wr.rank() != 2 || Wr.dim(0) != static_cast<int>(xa.size()) ||
      Wr.dim(1) != static_cast<int>(xa.size()))
    throw DimensionError("region metric " + Wr.shape_str() +
                         " does not match descriptor length " +
                         std::to_string(xa.size()));
  require_psd(Wr);
  size_t n = xa.size();
  const double* a = xa.data();
  const double* b = xb.data();
  const double* w = Wr.data();
  std::vector<double> d(n);
  for (size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  double out = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (size_t j = 0; j < n; ++j) row += w[i * n + j] * d[j];
    out += d[i] * row;
  }
  return out;
}

double integrated_local_similarity(const std::vector<Region>& regions) {
  if (regions.empty())
    throw DimensionError("integrated_local_similarity: empty region list");
  double out = 0.0;
  for (const auto& r : regions) out += region_similarity(r.xa, r.xb, r.Wr);
  return out;
}

ScoreMatrix score_images(const ModelParams& params,
                         const std::vector<double>& channel_mean,
                         const std::vector<const Sample*>& probes,
                         const std::vector<const Sample*>& gallery) {
  const ModelConfig& cfg = params.cfg;
  bool shared = cfg.encoder.shared_streams;

  size_t np = probes.size(), ng = gallery.size();
  std::vector<Tensor> probe_acts(np), gallery_acts(ng);
  parallel_chunks(np + ng, [&](int, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      if (i < np) {
        probe_acts[i] =
            encode(normalize_image(probes[i]->image, channel_mean),
                   cfg.encoder, params.enc_a)
                .values;
      } else {
        const EncoderParams& enc = shared ? params.enc_a : params.enc_b;
        gallery_acts[i - np] =
            encode(normalize_image(gallery[i - np]->image, channel_mean),
                   cfg.encoder, enc)
                .values;
      }
    }
  });

  ScoreMatrix s;
  s.scores = Tensor({static_cast<int>(np), static_cast<int>(ng)});
  for (const Sample* p : probes) s.probe_ids.push_back(p->identity);
  for (const Sample* g : gallery) s.gallery_ids.push_back(g->identity);
  double* out = s.scores.mutable_data();
  auto leaves = ModelLeaves::from(params, false);
  parallel_chunks(np, [&](int, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i)
      for (size_t j = 0; j < ng; ++j) {
        PairOutputs po =
            pair_graph(constant(probe_acts[i]), constant(gallery_acts[j]),
                       cfg, leaves, /*training=*/false, nullptr);
        out[i * ng + j] = po.similarity->value[0];
      }
  });
  return s;
}

EvalReport evaluate_model(const ModelParams& params,
                          const std::vector<double>& channel_mean,
                          const Dataset& test_set, int trials, uint64_t seed,
                          int probe_camera) {
  if (trials < 1) throw DimensionError("evaluate_model: trials must be >= 1");
  std::vector<const Sample*> probes;
  std::map<int, std::vector<const Sample*>> gallery_pool;  // by identity
  for (const auto& s : test_set.samples) {
    if (s.camera == probe_camera) probes.push_back(&s);
    else gallery_pool[s.identity].push_back(&s);
  }
  if (probes.empty() || gallery_pool.empty())
    throw DimensionError("evaluate_model: need probe and gallery cameras");

  EvalReport r;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng(seed).fork(static_cast<uint64_t>(t) + 1);
    std::vector<const Sample*> gallery;
    for (auto& [id, pool] : gallery_pool)
      gallery.push_back(pool[static_cast<size_t>(
          rng.uniform_int(static_cast<int>(pool.size())))]);
    ScoreMatrix s = score_images(params, channel_mean, probes, gallery);
    r.trial_cmc.push_back(cmc_single_shot(s));
    r.trial_map.push_back(mean_average_precision(s));
  }

  size_t g = r.trial_cmc[0].rates.size();
  r.mean_cmc.rates.assign(g, 0.0);
  r.std_cmc.assign(g, 0.0);
  for (const auto& c : r.trial_cmc)
    for (size_t i = 0; i < g; ++i) r.mean_cmc.rates[i] += c.rates[i];
  for (auto& v : r.mean_cmc.rates) v /= trials;
  for (const auto& c : r.trial_cmc)
    for (size_t i = 0; i < g; ++i) {
      double d = c.rates[i] - r.mean_cmc.rates[i];
      r.std_cmc[i] += d * d;
    }
  for (auto& v : r.std_cmc) v = std::sqrt(v / trials);
  for (double m : r.trial_map) r.mean_map += m;
  r.mean_map /= trials;
  for (double m : r.trial_map) {
    double d = m - r.mean_map;
    r.std_map += d * d;
  }
  r.std_map = std::sqrt(r.std_map / trials);
  return r;
}

std::string cmc_table(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "rank";
  for (size_t t = 0; t < r.trial_cmc.size(); ++t) os << "\ttrial" << t;
  os << "\tmean\tstd\n";
  size_t g = r.mean_cmc.rates.size();
  for (size_t i = 0; i < g; ++i) {
    os << (i + 1);
    for (const auto& c : r.trial_cmc) os << "\t" << c.rates[i];
    os << "\t" << r.mean_cmc.rates[i] << "\t" << r.std_cmc[i] << "\n";
  }
  return os.str();
}

std::string metrics_records(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (size_t t = 0; t < r.trial_cmc.size(); ++t)
    os << "trial=" << t << " rank1=" << r.trial_cmc[t].rates[0]
       << " map=" << r.trial_map[t] << "\n";
  os << "mean rank1=" << r.mean_cmc.rates[0] << " map=" << r.mean_map
     << " rank1_std=" << r.std_cmc[0] << " map_std=" << r.std_map << "\n";
  return os.str();
}

}  // namespace migate
