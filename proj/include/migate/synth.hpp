#pragma once

#include "migate/dataset.hpp"

namespace migate {

// Desk-scale pair-matching task: each identity owns a distinct set of small
// binary-contrast glyphs, planted over a noise background at positions that
// shift between the two cameras by at most `max_translation` pixels per axis.
struct SyntheticSpec {
  int identities = 16;
  int images_per_camera = 8;  // per identity
  int image_size = 32;        // square H = W
  int glyph_size = 8;
  int glyphs_per_identity = 2;
  // Size of the shared glyph library. 0 gives every identity its own
  // private glyphs; a small pool (> glyphs_per_identity) forces identities
  // to share glyphs so only the combination is discriminative, which makes
  // single-glyph cues ambiguous. Identity subsets are always distinct.
  int glyph_pool = 0;
  // Extra pool glyphs pasted per image at unconstrained random positions.
  // They equalize glyph-presence statistics across identities, so matching
  // has to rely on which glyphs appear at corresponding positions in both
  // views rather than on what appears in one image alone.
  int distractors = 0;
  int max_translation = 8;  // pixels, between-camera, per axis
  double noise_level = 0.3;
  uint64_t seed = 1;

  void validate() const;
};

struct GlyphPlacement {
  int identity = 0, camera = 0, index = 0;
  int glyph = 0;  // library index
  int row = 0, col = 0;  // top-left corner in the image
};

// Writes the dataset directory layout (<root>/<id>/<cam>_<idx>.ppm for
// cameras 0 and 1) plus manifest.txt listing every glyph placement. Returns
// the placements for in-process audits. Same spec => byte-identical output.
std::vector<GlyphPlacement> generate_pair_dataset(const SyntheticSpec& spec,
                                                  const std::string& root);

// 8x8-style binary pattern for library index g (deterministic in spec.seed)
Tensor glyph_pattern(const SyntheticSpec& spec, int g);

}  // namespace migate
