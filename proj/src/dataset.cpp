#include "migate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "migate/io.hpp"

namespace fs = std::filesystem;

namespace migate {

std::vector<double> Dataset::channel_mean() const {
  if (samples.empty()) throw DimensionError("channel_mean: empty dataset");
  int c = samples[0].image.dim(2);
  std::vector<double> mean(static_cast<size_t>(c), 0.0);
  size_t count = 0;
  for (const auto& s : samples) {
    const double* p = s.image.data();
    for (size_t i = 0; i < s.image.size(); ++i) mean[i % c] += p[i];
    count += s.image.size() / c;
  }
  for (auto& m : mean) m /= static_cast<double>(count);
  return mean;
}

std::vector<int> Dataset::identities() const {
  std::set<int> ids;
  for (const auto& s : samples) ids.insert(s.identity);
  return {ids.begin(), ids.end()};
}

void write_ppm(const std::string& path, const Tensor& image01) {
  if (image01.rank() != 3 || image01.dim(2) != 3)
    throw DimensionError("write_ppm: image must be H x W x 3");
  int h = image01.dim(0), w = image01.dim(1);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "P6\n" << w << " " << h << "\n255\n";
  const double* p = image01.data();
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w * 3; ++j) {
      double v = p[static_cast<size_t>(i) * w * 3 + j];
      int byte = static_cast<int>(std::lround(v * 255.0));
      row[static_cast<size_t>(j)] =
          static_cast<unsigned char>(std::clamp(byte, 0, 255));
    }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw IoError("write failed for '" + path + "'");
}

namespace {
int ppm_token(std::istream& is, const std::string& path) {
  // skips whitespace and # comments
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      break;
    }
  }
  if (c == EOF) throw TruncatedError("truncated PPM header in '" + path + "'");
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = is.get();
  }
  if (!any) throw IoError("malformed PPM header in '" + path + "'");
  return value;
}
}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
  if (m0 != 'P' || m1 != '6')
    throw BadMagicError("'" + path + "' is not a binary PPM (P6) file");
  int w = ppm_token(is, path);
  int h = ppm_token(is, path);
  int maxval = ppm_token(is, path);
  if (maxval != 255)
    throw IoError("'" + path + "': unsupported PPM maxval " +
                  std::to_string(maxval));
  std::vector<unsigned char> bytes(static_cast<size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw TruncatedError("truncated PPM payload in '" + path + "'");
  Tensor img({h, w, 3});
  double* p = img.mutable_data();
  for (size_t i = 0; i < bytes.size(); ++i) p[i] = bytes[i] / 255.0;
  return img;
}

Dataset load_dataset(const std::string& root) {
  if (!fs::is_directory(root))
    throw IoError("dataset root '" + root + "' is not a directory");
  Dataset ds;
  std::vector<fs::path> id_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) id_dirs.push_back(e.path());
  std::sort(id_dirs.begin(), id_dirs.end());
  for (const auto& dir : id_dirs) {
    int identity;
    try {
      identity = std::stoi(dir.filename().string());
    } catch (...) {
      continue;  // non-identity directory
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".ppm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::string stem = f.stem().string();
      auto us = stem.find('_');
      if (us == std::string::npos) continue;
      Sample s;
      try {
        s.camera = std::stoi(stem.substr(0, us));
        s.index = std::stoi(stem.substr(us + 1));
      } catch (...) {
        continue;
      }
      s.identity = identity;
      s.image = read_ppm(f.string());
      ds.samples.push_back(std::move(s));
    }
  }
  if (ds.samples.empty())
    throw IoError("dataset root '" + root + "' contains no samples");
  std::sort(ds.samples.begin(), ds.samples.end(),
            [](const Sample& a, const Sample& b) {
              return std::tie(a.identity, a.camera, a.index) <
                     std::tie(b.identity, b.camera, b.index);
            });
  return ds;
}

SplitSet split_dataset(const std::string& root, const Dataset& all,
                       double train_frac, double val_frac) {
  std::map<std::tuple<int, int, int>, Split> explicit_splits;
  fs::path manifest = fs::path(root) / "splits.txt";
  if (fs::exists(manifest)) {
    std::ifstream is(manifest);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      int id, cam, idx;
      std::string split;
      if (!(ls >> id >> cam >> idx >> split))
        throw IoError("splits.txt line " + std::to_string(lineno) +
                      ": expected 'identity camera index split'");
      Split sp;
      if (split == "train") sp = Split::train;
      else if (split == "val") sp = Split::val;
      else if (split == "test") sp = Split::test;
      else
        throw IoError("splits.txt line " + std::to_string(lineno) +
                      ": unknown split '" + split + "'");
      explicit_splits[{id, cam, idx}] = sp;
    }
  }

  // per identity/camera group sizes, for fraction-based assignment
  std::map<std::pair<int, int>, int> group_size, group_pos;
  for (const auto& s : all.samples) group_size[{s.identity, s.camera}]++;

  SplitSet out;
  for (const auto& s : all.samples) {
    Split sp;
    if (!explicit_splits.empty()) {
      auto it = explicit_splits.find({s.identity, s.camera, s.index});
      if (it == explicit_splits.end())
        throw IoError("splits.txt does not cover sample " +
                      std::to_string(s.identity) + "/" +
                      std::to_string(s.camera) + "_" + std::to_string(s.index));
      sp = it->second;
    } else {
      int n = group_size[{s.identity, s.camera}];
      int pos = group_pos[{s.identity, s.camera}]++;
      int n_train = std::max(1, static_cast<int>(std::lround(n * train_frac)));
      int n_val = std::max(n > 2 ? 1 : 0,
                           static_cast<int>(std::lround(n * val_frac)));
      if (n_train + n_val >= n && n > 2) n_train = n - n_val - 1;
      sp = pos < n_train ? Split::train
                         : (pos < n_train + n_val ? Split::val : Split::test);
    }
    (sp == Split::train ? out.train : sp == Split::val ? out.val : out.test)
        .samples.push_back(s);
  }
  return out;
}

Sample augment_flip(const Sample& s) {
  Sample out = s;
  int h = s.image.dim(0), w = s.image.dim(1), c = s.image.dim(2);
  out.image = Tensor({h, w, c});
  double* o = out.image.mutable_data();
  const double* p = s.image.data();
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < c; ++k)
        o[(static_cast<size_t>(i) * w + j) * c + k] =
            p[(static_cast<size_t>(i) * w + (w - 1 - j)) * c + k];
  return out;
}

int horizontal_shift_pixels(int width) { return std::max(1, 5 * width / 224); }
int vertical_shift_pixels(int height) { return std::max(1, 10 * height / 224); }

Sample shift_sample(const Sample& s, int dx, int dy) {
  int h = s.image.dim(0), w = s.image.dim(1), c = s.image.dim(2);
  if (std::abs(dx) >= w || std::abs(dy) >= h)
    throw DimensionError("shift (" + std::to_string(dx) + "," +
                         std::to_string(dy) + ") exceeds image extent " +
                         std::to_string(w) + "x" + std::to_string(h));
  Sample out = s;
  out.image = Tensor({h, w, c});
  double* o = out.image.mutable_data();
  const double* p = s.image.data();
  for (int i = 0; i < h; ++i) {
    int si = std::clamp(i - dy, 0, h - 1);  // edge replication
    for (int j = 0; j < w; ++j) {
      int sj = std::clamp(j - dx, 0, w - 1);
      for (int k = 0; k < c; ++k)
        o[(static_cast<size_t>(i) * w + j) * c + k] =
            p[(static_cast<size_t>(si) * w + sj) * c + k];
    }
  }
  return out;
}

std::vector<Sample> augment_shift(const Sample& s) {
  int h = horizontal_shift_pixels(s.image.dim(1));
  int v = vertical_shift_pixels(s.image.dim(0));
  Sample left = shift_sample(s, -h, 0);
  Sample right = shift_sample(s, +h, 0);
  std::vector<Sample> out{left, right};
  for (const Sample& stage1 : {left, right}) {
    out.push_back(shift_sample(stage1, 0, -v));
    out.push_back(shift_sample(stage1, 0, +v));
  }
  return out;
}

std::vector<Sample> augment_all(const Sample& s) {
  std::vector<Sample> out{s, augment_flip(s)};
  for (int k = 0; k < 2; ++k)
    for (auto& sh : augment_shift(out[static_cast<size_t>(k)]))
      out.push_back(std::move(sh));
  return out;
}

}  // namespace migate
