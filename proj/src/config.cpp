#include "migate/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "migate/io.hpp"

namespace migate {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& name) {
  Config c;
  c.name_ = name;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    auto hash = t.find('#');
    if (hash != std::string::npos) t = trim(t.substr(0, hash));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw IoError(name + ":" + std::to_string(lineno) +
                      ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw IoError(name + ":" + std::to_string(lineno) + ": empty section");
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw IoError(name + ":" + std::to_string(lineno) +
                    ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw IoError(name + ":" + std::to_string(lineno) + ": empty key");
    c.values_[{section, key}] = value;
  }
  return c;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_string(buf.str(), path);
}

bool Config::has(const std::string& section, const std::string& key) const {
  return values_.count({section, key}) > 0;
}

std::string Config::get(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
  auto it = values_.find({section, key});
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require(const std::string& section,
                            const std::string& key) const {
  auto it = values_.find({section, key});
  if (it == values_.end())
    throw IoError(name_ + ": missing required field [" + section + "] " + key);
  return it->second;
}

namespace {

template <typename T, typename Fn>
T parse_or(const std::string& text, const std::string& where, const Fn& fn) {
  try {
    size_t pos = 0;
    T v = fn(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw IoError(where + ": cannot parse value '" + text + "'");
  }
}

}  // namespace

int Config::get_int(const std::string& section, const std::string& key,
                    int fallback) const {
  if (!has(section, key)) return fallback;
  return parse_or<int>(get(section, key, ""), "[" + section + "] " + key,
                       [](const std::string& s, size_t* pos) {
                         return std::stoi(s, pos);
                       });
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  if (!has(section, key)) return fallback;
  return parse_or<double>(get(section, key, ""), "[" + section + "] " + key,
                          [](const std::string& s, size_t* pos) {
                            return std::stod(s, pos);
                          });
}

uint64_t Config::get_u64(const std::string& section, const std::string& key,
                         uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  return parse_or<uint64_t>(get(section, key, ""), "[" + section + "] " + key,
                            [](const std::string& s, size_t* pos) {
                              return std::stoull(s, pos);
                            });
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get(section, key, "");
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw IoError("[" + section + "] " + key + ": cannot parse boolean '" + v +
                "'");
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
  values_[{section, key}] = value;
}

EncoderConfig make_encoder_config(int image_size, int out_extent,
                                  int out_channels) {
  if (image_size < 1 || out_extent < 1 || out_channels < 1)
    throw DimensionError("encoder geometry must be positive");
  if (image_size % out_extent != 0)
    throw DimensionError("image size must be a multiple of the output extent");
  int ratio = image_size / out_extent;
  int halvings = 0;
  while ((1 << halvings) < ratio) ++halvings;
  if ((1 << halvings) != ratio)
    throw DimensionError(
        "image size / output extent must be a power of two, got " +
        std::to_string(ratio));
  EncoderConfig cfg;
  cfg.in_height = cfg.in_width = image_size;
  cfg.in_channels = 3;
  for (int i = 0; i < halvings; ++i) {
    int ch = std::max(4, out_channels >> (halvings - 1 - i));
    cfg.layers.push_back({3, 2, ch, true});
  }
  cfg.layers.push_back({3, 1, out_channels, true});
  cfg.out_extent = out_extent;
  cfg.out_channels = out_channels;
  return cfg;
}

SyntheticSpec synth_spec_from_config(const Config& c) {
  SyntheticSpec s;
  s.identities = c.get_int("synthetic", "identities", s.identities);
  s.images_per_camera =
      c.get_int("synthetic", "images_per_camera", s.images_per_camera);
  s.image_size = c.get_int("synthetic", "image_size", s.image_size);
  s.glyph_size = c.get_int("synthetic", "glyph_size", s.glyph_size);
  s.glyphs_per_identity =
      c.get_int("synthetic", "glyphs_per_identity", s.glyphs_per_identity);
  s.glyph_pool = c.get_int("synthetic", "glyph_pool", s.glyph_pool);
  s.distractors = c.get_int("synthetic", "distractors", s.distractors);
  s.max_translation =
      c.get_int("synthetic", "max_translation", s.max_translation);
  s.noise_level = c.get_double("synthetic", "noise_level", s.noise_level);
  s.seed = c.get_u64("synthetic", "seed", s.seed);
  s.validate();
  return s;
}

ModelConfig model_config_from_config(const Config& c) {
  ModelConfig m;
  int image_size = c.get_int("encoder", "image_size", 32);
  int extent = c.get_int("encoder", "extent", std::max(1, image_size / 4));
  int channels = c.get_int("encoder", "channels", 16);
  m.encoder = make_encoder_config(image_size, extent, channels);
  m.encoder.shared_streams = c.get_bool("encoder", "shared_streams", true);
  m.fusion = fusion_mode_from_string(c.get("gate", "fusion", "gated"));
  m.gate_embed = c.get_int("gate", "embed", 0);
  m.context = context_kind_from_string(c.get("context", "kind", "irnn2"));
  m.hidden = c.get_int("context", "hidden", 24);
  m.inter_channels = c.get_int("context", "inter_channels", 0);
  m.dropout_p = c.get_double("context", "dropout", 0.5);
  if (c.has("context", "spp_levels")) {
    m.spp.levels.clear();
    std::istringstream ls(c.get("context", "spp_levels", ""));
    int l;
    while (ls >> l) m.spp.levels.push_back(l);
    if (m.spp.levels.empty())
      throw IoError("[context] spp_levels: expected a list of integers");
  }
  m.head_embed = c.get_int("head", "embed", 32);
  m.finalize();
  return m;
}

TrainConfig train_config_from_config(const Config& c) {
  TrainConfig t;
  t.lr = c.get_double("train", "lr", t.lr);
  t.momentum = c.get_double("train", "momentum", t.momentum);
  t.epochs = c.get_int("train", "epochs", t.epochs);
  t.batch_size = c.get_int("train", "batch_size", t.batch_size);
  t.patience = c.get_int("train", "patience", t.patience);
  t.lr_decay = c.get_double("train", "lr_decay", t.lr_decay);
  t.lr_patience = c.get_int("train", "lr_patience", t.lr_patience);
  t.seed = c.get_u64("train", "seed", t.seed);
  t.train_frac = c.get_double("train", "train_frac", t.train_frac);
  t.val_frac = c.get_double("train", "val_frac", t.val_frac);
  t.augment = c.get_bool("train", "augment", t.augment);
  t.loss.alpha = c.get_double("loss", "alpha", t.loss.alpha);
  t.loss.beta = c.get_double("loss", "beta", t.loss.beta);
  return t;
}

}  // namespace migate
