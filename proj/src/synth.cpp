#include "migate/synth.hpp"

#include <filesystem>
#include <fstream>

#include "migate/io.hpp"

namespace fs = std::filesystem;

namespace migate {

void SyntheticSpec::validate() const {
  if (identities < 2)
    throw DimensionError("synthetic spec: need at least 2 identities");
  if (images_per_camera < 1 || image_size < 2 || glyph_size < 1 ||
      glyphs_per_identity < 1)
    throw DimensionError("synthetic spec: counts must be positive");
  if (glyph_size >= image_size)
    throw DimensionError("synthetic spec: glyph does not fit in the image");
  if (max_translation < 0 || max_translation >= image_size - glyph_size)
    throw DimensionError(
        "synthetic spec: max translation must be < image size - glyph size");
  if (noise_level < 0.0 || noise_level > 1.0)
    throw DimensionError("synthetic spec: noise level must be in [0, 1]");
  if (glyph_pool != 0) {
    if (glyph_pool <= glyphs_per_identity)
      throw DimensionError(
          "synthetic spec: glyph pool must exceed glyphs per identity");
    double combos = 1.0;
    for (int i = 0; i < glyphs_per_identity; ++i)
      combos *= static_cast<double>(glyph_pool - i) / (i + 1);
    if (combos < static_cast<double>(identities))
      throw DimensionError(
          "synthetic spec: glyph pool too small for distinct identity "
          "subsets");
  }
  int band = image_size / glyphs_per_identity;
  if (band < glyph_size + max_translation)
    throw DimensionError(
        "synthetic spec: image too small for non-overlapping glyph bands "
        "(need size/glyphs_per_identity >= glyph size + max translation)");
}

Tensor glyph_pattern(const SyntheticSpec& spec, int g) {
  Rng rng = Rng(spec.seed).fork(0xA000 + static_cast<uint64_t>(g));
  Tensor t({spec.glyph_size, spec.glyph_size});
  double* p = t.mutable_data();
  for (size_t i = 0; i < t.size(); ++i) p[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  p[0] = 1.0;  // never fully empty
  return t;
}

namespace {

struct Canonical {
  int row, col;
};

}  // namespace

std::vector<GlyphPlacement> generate_pair_dataset(const SyntheticSpec& spec,
                                                  const std::string& root) {
  spec.validate();
  int band = spec.image_size / spec.glyphs_per_identity;
  int half = spec.max_translation / 2;

  // canonical glyph anchors per identity; each glyph gets its own horizontal
  // band so glyphs never overlap regardless of the per-view offsets
  std::vector<std::vector<Canonical>> anchors(
      static_cast<size_t>(spec.identities));
  for (int id = 0; id < spec.identities; ++id) {
    Rng rng = Rng(spec.seed).fork(0xB000 + static_cast<uint64_t>(id));
    for (int s = 0; s < spec.glyphs_per_identity; ++s) {
      int row_lo = s * band + half;
      int row_hi = s * band + band - spec.glyph_size - half;
      int col_lo = half;
      int col_hi = spec.image_size - spec.glyph_size - half;
      Canonical c;
      c.row = row_lo + (row_hi > row_lo ? rng.uniform_int(row_hi - row_lo + 1)
                                        : 0);
      c.col = col_lo + (col_hi > col_lo ? rng.uniform_int(col_hi - col_lo + 1)
                                        : 0);
      anchors[static_cast<size_t>(id)].push_back(c);
    }
  }

  std::vector<Tensor> glyphs;
  int library = spec.glyph_pool > 0 ? spec.glyph_pool
                                    : spec.identities * spec.glyphs_per_identity;
  for (int g = 0; g < library; ++g) glyphs.push_back(glyph_pattern(spec, g));

  // identity -> glyph subset: private consecutive glyphs, or the i-th
  // lexicographic combination of the shared pool (always distinct)
  std::vector<std::vector<int>> subsets(static_cast<size_t>(spec.identities));
  if (spec.glyph_pool == 0) {
    for (int id = 0; id < spec.identities; ++id)
      for (int s = 0; s < spec.glyphs_per_identity; ++s)
        subsets[static_cast<size_t>(id)].push_back(
            id * spec.glyphs_per_identity + s);
  } else {
    std::vector<int> combo(static_cast<size_t>(spec.glyphs_per_identity));
    for (int s = 0; s < spec.glyphs_per_identity; ++s)
      combo[static_cast<size_t>(s)] = s;
    for (int id = 0; id < spec.identities; ++id) {
      subsets[static_cast<size_t>(id)] = combo;
      int k = spec.glyphs_per_identity;
      for (int s = k - 1; s >= 0; --s) {
        if (combo[static_cast<size_t>(s)] < spec.glyph_pool - (k - s)) {
          ++combo[static_cast<size_t>(s)];
          for (int t = s + 1; t < k; ++t)
            combo[static_cast<size_t>(t)] = combo[static_cast<size_t>(t - 1)] + 1;
          break;
        }
      }
    }
  }

  fs::create_directories(root);
  std::vector<GlyphPlacement> manifest;
  for (int id = 0; id < spec.identities; ++id) {
    fs::create_directories(fs::path(root) / std::to_string(id));
    for (int cam = 0; cam < 2; ++cam) {
      for (int idx = 0; idx < spec.images_per_camera; ++idx) {
        uint64_t salt =
            (static_cast<uint64_t>(id) * 2 + static_cast<uint64_t>(cam)) *
                static_cast<uint64_t>(spec.images_per_camera) +
            static_cast<uint64_t>(idx);
        Rng rng = Rng(spec.seed).fork(0xC000 + salt);
        Tensor img({spec.image_size, spec.image_size, 3});
        double* p = img.mutable_data();
        std::vector<GlyphPlacement> placed;
        for (int s = 0; s < spec.glyphs_per_identity; ++s) {
          const Canonical& c = anchors[static_cast<size_t>(id)]
                                      [static_cast<size_t>(s)];
          int dr = half > 0 ? rng.uniform_int(2 * half + 1) - half : 0;
          int dc = half > 0 ? rng.uniform_int(2 * half + 1) - half : 0;
          GlyphPlacement gp;
          gp.identity = id;
          gp.camera = cam;
          gp.index = idx;
          gp.glyph = subsets[static_cast<size_t>(id)][static_cast<size_t>(s)];
          gp.row = c.row + dr;
          gp.col = c.col + dc;
          placed.push_back(gp);
        }
        for (size_t i = 0; i < img.size(); ++i)
          p[i] = rng.uniform() * spec.noise_level;
        auto paste = [&](int glyph, int row, int col) {
          const Tensor& pat = glyphs[static_cast<size_t>(glyph)];
          for (int i = 0; i < spec.glyph_size; ++i)
            for (int j = 0; j < spec.glyph_size; ++j) {
              double v = pat[static_cast<size_t>(i) * spec.glyph_size + j];
              for (int ch = 0; ch < 3; ++ch)
                p[img.idx3(row + i, col + j, ch)] = v;
            }
        };
        // distractors first so identity glyphs stay fully visible
        int span = spec.image_size - spec.glyph_size + 1;
        for (int d = 0; d < spec.distractors; ++d)
          paste(rng.uniform_int(library), rng.uniform_int(span),
                rng.uniform_int(span));
        for (const auto& gp : placed) {
          paste(gp.glyph, gp.row, gp.col);
          manifest.push_back(gp);
        }
        fs::path file = fs::path(root) / std::to_string(id) /
                        (std::to_string(cam) + "_" + std::to_string(idx) +
                         ".ppm");
        write_ppm(file.string(), img);
      }
    }
  }

  std::ofstream mf(fs::path(root) / "manifest.txt");
  if (!mf) throw IoError("cannot write manifest in '" + root + "'");
  mf << "# identity camera index glyph row col\n";
  for (const auto& gp : manifest)
    mf << gp.identity << " " << gp.camera << " " << gp.index << " " << gp.glyph
       << " " << gp.row << " " << gp.col << "\n";
  if (!mf) throw IoError("manifest write failed in '" + root + "'");
  return manifest;
}

}  // namespace migate
