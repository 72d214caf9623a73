#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "migate/config.hpp"
#include "migate/dataset.hpp"
#include "migate/io.hpp"
#include "migate/synth.hpp"

using namespace migate;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("migate_" + tag);
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.identities = 4;
  spec.images_per_camera = 2;
  spec.image_size = 32;
  spec.glyph_size = 8;
  spec.glyphs_per_identity = 2;
  spec.max_translation = 8;
  spec.noise_level = 0.3;
  spec.seed = 5;
  return spec;
}

}  // namespace

TEST_CASE("dataset generation is byte-identical for the same spec") {
  TempDir a("synth_a"), b("synth_b");
  SyntheticSpec spec = small_spec();
  generate_pair_dataset(spec, a.path.string());
  generate_pair_dataset(spec, b.path.string());
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    ++files;
    fs::path rel = fs::relative(e.path(), a.path);
    CHECK(slurp(e.path()) == slurp(b.path / rel));
  }
  CHECK(files == 4 * 2 * 2 + 1);  // images + manifest
}

TEST_CASE("zero translation and zero noise make the cameras pixel-identical") {
  TempDir tmp("synth_frozen");
  SyntheticSpec spec = small_spec();
  spec.max_translation = 0;
  spec.noise_level = 0.0;
  generate_pair_dataset(spec, tmp.path.string());
  Dataset ds = load_dataset(tmp.path.string());
  std::map<std::pair<int, int>, const Sample*> cam0;
  for (const auto& s : ds.samples)
    if (s.camera == 0) cam0[{s.identity, s.index}] = &s;
  for (const auto& s : ds.samples) {
    if (s.camera != 1) continue;
    const Sample* ref = cam0.at({s.identity, s.index});
    for (size_t i = 0; i < s.image.size(); ++i)
      CHECK(s.image[i] == ref->image[i]);
  }
}

TEST_CASE("manifest placements stay within the translation budget") {
  TempDir tmp("synth_budget");
  SyntheticSpec spec = small_spec();
  auto manifest = generate_pair_dataset(spec, tmp.path.string());
  CHECK(manifest.size() ==
        static_cast<size_t>(spec.identities * 2 * spec.images_per_camera *
                            spec.glyphs_per_identity));
  // group placements of the same identity glyph; max spread <= max_translation
  std::map<std::pair<int, int>, std::vector<const GlyphPlacement*>> groups;
  for (const auto& gp : manifest) groups[{gp.identity, gp.glyph}].push_back(&gp);
  for (const auto& [key, list] : groups) {
    int rmin = 1 << 30, rmax = -1, cmin = 1 << 30, cmax = -1;
    for (const auto* gp : list) {
      rmin = std::min(rmin, gp->row);
      rmax = std::max(rmax, gp->row);
      cmin = std::min(cmin, gp->col);
      cmax = std::max(cmax, gp->col);
      CHECK(gp->row >= 0);
      CHECK(gp->col >= 0);
      CHECK(gp->row + spec.glyph_size <= spec.image_size);
      CHECK(gp->col + spec.glyph_size <= spec.image_size);
    }
    CHECK(rmax - rmin <= spec.max_translation);
    CHECK(cmax - cmin <= spec.max_translation);
  }
}

TEST_CASE("identity glyphs land on the written pixels") {
  TempDir tmp("synth_pixels");
  SyntheticSpec spec = small_spec();
  spec.noise_level = 0.2;  // noise < 1 so glyph-on pixels are unambiguous
  auto manifest = generate_pair_dataset(spec, tmp.path.string());
  Dataset ds = load_dataset(tmp.path.string());
  for (const auto& gp : manifest) {
    const Sample* s = nullptr;
    for (const auto& cand : ds.samples)
      if (cand.identity == gp.identity && cand.camera == gp.camera &&
          cand.index == gp.index) {
        s = &cand;
        break;
      }
    REQUIRE(s != nullptr);
    Tensor pat = glyph_pattern(spec, gp.glyph);
    for (int i = 0; i < spec.glyph_size; ++i)
      for (int j = 0; j < spec.glyph_size; ++j) {
        double v = pat[static_cast<size_t>(i) * spec.glyph_size + j];
        double px = s->image[s->image.idx3(gp.row + i, gp.col + j, 0)];
        CHECK(px == doctest::Approx(v).epsilon(0.01));  // 8-bit quantization
      }
  }
}

TEST_CASE("shared-pool subsets are distinct across identities") {
  SyntheticSpec spec = small_spec();
  spec.glyph_pool = 4;  // C(4,2) = 6 >= 4 identities
  TempDir tmp("synth_pool");
  auto manifest = generate_pair_dataset(spec, tmp.path.string());
  std::map<int, std::set<int>> subsets;
  for (const auto& gp : manifest) {
    CHECK(gp.glyph < spec.glyph_pool);
    subsets[gp.identity].insert(gp.glyph);
  }
  std::set<std::set<int>> unique_subsets;
  for (const auto& [id, sub] : subsets) {
    CHECK(sub.size() == static_cast<size_t>(spec.glyphs_per_identity));
    unique_subsets.insert(sub);
  }
  CHECK(unique_subsets.size() == static_cast<size_t>(spec.identities));
}

TEST_CASE("invalid synthetic specs are rejected") {
  SyntheticSpec s = small_spec();
  s.identities = 1;
  CHECK_THROWS_AS(s.validate(), DimensionError);

  s = small_spec();
  s.max_translation = 24;  // band 16 < glyph 8 + translation 24
  CHECK_THROWS_AS(s.validate(), DimensionError);

  s = small_spec();
  s.noise_level = 1.5;
  CHECK_THROWS_AS(s.validate(), DimensionError);

  s = small_spec();
  s.glyph_pool = 2;  // not larger than glyphs_per_identity
  CHECK_THROWS_AS(s.validate(), DimensionError);

  s = small_spec();
  s.identities = 16;
  s.glyph_pool = 4;  // C(4,2) = 6 < 16
  CHECK_THROWS_AS(s.validate(), DimensionError);
}

TEST_CASE("config parser handles sections, comments, and typed accessors") {
  Config c = Config::parse_string(
      "top = 1\n"
      "[train]\n"
      "lr = 0.05  # inline comment\n"
      "epochs = 40\n"
      "augment = yes\n"
      "# full-line comment\n"
      "[synthetic]\n"
      "seed = 12345678901\n",
      "inline");
  CHECK(c.get_int("", "top", 0) == 1);
  CHECK(c.get_double("train", "lr", 0.0) == doctest::Approx(0.05));
  CHECK(c.get_int("train", "epochs", 0) == 40);
  CHECK(c.get_bool("train", "augment", false));
  CHECK(c.get_u64("synthetic", "seed", 0) == 12345678901ull);
  CHECK(c.get_int("train", "missing", 7) == 7);
  CHECK_THROWS_AS(c.require("train", "missing"), IoError);
}

TEST_CASE("config parse errors carry the source line number") {
  CHECK_THROWS_WITH_AS(Config::parse_string("a = 1\nbroken line\n", "f.ini"),
                       doctest::Contains("f.ini:2"), IoError);
  CHECK_THROWS_WITH_AS(Config::parse_string("[unterminated\n", "g.ini"),
                       doctest::Contains("g.ini:1"), IoError);
  Config c = Config::parse_string("[train]\nlr = fast\n", "h.ini");
  CHECK_THROWS_WITH_AS(c.get_double("train", "lr", 0.0),
                       doctest::Contains("lr"), IoError);
}

TEST_CASE("encoder geometry builder emits a power-of-two stride stack") {
  EncoderConfig e = make_encoder_config(32, 8, 16);
  e.validate();
  CHECK(e.out_extent == 8);
  CHECK(e.out_channels == 16);
  int strides = 1;
  for (const auto& l : e.layers) strides *= l.stride;
  CHECK(strides == 4);
  CHECK(e.layers.back().stride == 1);

  CHECK_THROWS_AS(make_encoder_config(48, 8, 16), DimensionError);  // ratio 6
  CHECK_THROWS_AS(make_encoder_config(32, 5, 16), DimensionError);
}

TEST_CASE("config sections assemble a coherent model and train setup") {
  Config c = Config::parse_string(
      "[synthetic]\nidentities = 4\nimages_per_camera = 2\nseed = 3\n"
      "[encoder]\nimage_size = 32\nextent = 8\nchannels = 16\n"
      "[gate]\nfusion = concat\n"
      "[context]\nkind = spp\nspp_levels = 1 2\nhidden = 8\n"
      "[head]\nembed = 16\n"
      "[train]\nlr = 0.3\nepochs = 9\n"
      "[loss]\nalpha = 3.0\nbeta = 0.25\n",
      "full");
  SyntheticSpec spec = synth_spec_from_config(c);
  CHECK(spec.identities == 4);
  CHECK(spec.seed == 3);
  ModelConfig m = model_config_from_config(c);
  CHECK(m.fusion == FusionMode::concat);
  CHECK(m.context == ContextKind::spp);
  CHECK(m.spp.levels == std::vector<int>{1, 2});
  CHECK(m.hidden == 8);
  CHECK(m.head_embed == 16);
  CHECK(m.encoder.out_extent == 8);
  TrainConfig t = train_config_from_config(c);
  CHECK(t.lr == doctest::Approx(0.3));
  CHECK(t.epochs == 9);
  CHECK(t.loss.alpha == doctest::Approx(3.0));
  CHECK(t.loss.beta == doctest::Approx(0.25));
}
