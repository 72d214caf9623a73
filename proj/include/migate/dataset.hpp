#pragma once

#include "migate/tensor.hpp"

namespace migate {

struct Sample {
  Tensor image;  // {H, W, C}, values in [0, 1]
  int identity = 0;
  int camera = 0;
  int index = 0;  // per identity/camera image number
};

enum class Split { train, val, test };

struct Dataset {
  std::vector<Sample> samples;
  std::vector<double> channel_mean() const;
  std::vector<int> identities() const;  // sorted unique
};

// 8-bit binary PPM (P6)
void write_ppm(const std::string& path, const Tensor& image01);
Tensor read_ppm(const std::string& path);

// Directory layout <root>/<identity>/<camera>_<index>.ppm
Dataset load_dataset(const std::string& root);

// Per-sample split assignment. When <root>/splits.txt exists (lines of
// "identity camera index {train|val|test}") it wins; otherwise images of
// each identity/camera group are partitioned by the given fractions in
// index order.
struct SplitSet {
  Dataset train, val, test;
};
SplitSet split_dataset(const std::string& root, const Dataset& all,
                       double train_frac, double val_frac);

// horizontal mirror, label preserved
Sample augment_flip(const Sample& s);

// Two-step shift family: horizontal +-h first, then vertical +-v applied to
// each horizontal result; borders filled by edge replication. Shift sizes
// are 5 / 10 pixels at a 224-pixel reference size, scaled proportionally to
// the image (floor, minimum 1).
int horizontal_shift_pixels(int width);
int vertical_shift_pixels(int height);
Sample shift_sample(const Sample& s, int dx, int dy);  // +dx right, +dy down
std::vector<Sample> augment_shift(const Sample& s);

// original + flip, each with its shift family
std::vector<Sample> augment_all(const Sample& s);

}  // namespace migate
