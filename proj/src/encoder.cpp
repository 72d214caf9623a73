#include "migate/encoder.hpp"

#include <cmath>

#include "migate/io.hpp"

namespace migate {

namespace {
constexpr uint16_t kMiamVersion = 1;

void layer_geometry(int& h, int& w, const ConvLayerSpec& l) {
  int p = (l.kernel - 1) / 2;
  h = (h + 2 * p - l.kernel) / l.stride + 1;
  w = (w + 2 * p - l.kernel) / l.stride + 1;
}
}  // namespace

EncoderConfig EncoderConfig::desk_default() {
  EncoderConfig cfg;
  cfg.in_height = 64;
  cfg.in_width = 64;
  cfg.in_channels = 3;
  cfg.layers = {{3, 2, 16, true}, {3, 2, 32, true}, {3, 2, 64, true},
                {3, 1, 64, true}};
  cfg.out_extent = 8;
  cfg.out_channels = 64;
  return cfg;
}

void EncoderConfig::validate() const {
  if (in_height <= 0 || in_width <= 0 || in_channels <= 0)
    throw DimensionError("encoder input size must be positive");
  if (layers.empty()) throw DimensionError("encoder needs at least one layer");
  int h = in_height, w = in_width;
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kernel < 1 || l.kernel % 2 == 0)
      throw DimensionError("encoder layer " + std::to_string(i) +
                           ": kernel must be odd");
    if (l.stride < 1 || l.channels < 1)
      throw DimensionError("encoder layer " + std::to_string(i) +
                           ": stride and channels must be positive");
    layer_geometry(h, w, l);
    if (h < 1 || w < 1)
      throw DimensionError("encoder layer " + std::to_string(i) +
                           " shrinks the map below 1x1");
  }
  if (h != w)
    throw DimensionError("encoder output is " + std::to_string(h) + "x" +
                         std::to_string(w) + ", activation maps must be square");
  if (h != out_extent || layers.back().channels != out_channels)
    throw DimensionError(
        "encoder geometry yields " + std::to_string(h) + "x" +
        std::to_string(w) + "x" + std::to_string(layers.back().channels) +
        ", configured output is " + std::to_string(out_extent) + "x" +
        std::to_string(out_extent) + "x" + std::to_string(out_channels));
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderParams p;
  int cin = cfg.in_channels;
  for (const auto& l : cfg.layers) {
    Tensor w({l.kernel, l.kernel, cin, l.channels});
    // He-uniform: keeps activation variance roughly constant through the
    // ReLU stack so downstream gate embeddings see O(1) inputs
    int fan_in = l.kernel * l.kernel * cin;
    double bound = std::sqrt(6.0 / fan_in);
    double* pw = w.mutable_data();
    for (size_t i = 0; i < w.size(); ++i) pw[i] = rng.uniform(-bound, bound);
    w.quantize();
    p.W.push_back(std::move(w));
    p.b.push_back(Tensor({l.channels}));
    cin = l.channels;
  }
  return p;
}

size_t EncoderParams::param_count() const {
  size_t n = 0;
  for (const auto& w : W) n += w.size();
  for (const auto& b2 : b) n += b2.size();
  return n;
}

EncoderLeaves EncoderLeaves::from(const EncoderParams& p, bool trainable) {
  auto wrap = [trainable](const Tensor& t) {
    return trainable ? leaf(t) : constant(t);
  };
  EncoderLeaves l;
  for (const auto& w : p.W) l.W.push_back(wrap(w));
  for (const auto& b : p.b) l.b.push_back(wrap(b));
  return l;
}

Var encode(const Var& image, const EncoderConfig& cfg,
           const EncoderLeaves& leaves) {
  if (image->value.rank() != 3 || image->value.dim(0) != cfg.in_height ||
      image->value.dim(1) != cfg.in_width ||
      image->value.dim(2) != cfg.in_channels)
    throw DimensionError("encode: image " + image->value.shape_str() +
                         " does not match configured input " +
                         std::to_string(cfg.in_height) + "x" +
                         std::to_string(cfg.in_width) + "x" +
                         std::to_string(cfg.in_channels));
  Var h = image;
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    h = ops::conv2d(h, leaves.W[i], leaves.b[i], cfg.layers[i].stride);
    if (cfg.layers[i].relu) h = ops::relu(h);
  }
  return h;
}

ActivationMap encode(const Tensor& image, const EncoderConfig& cfg,
                     const EncoderParams& params) {
  auto leaves = EncoderLeaves::from(params, false);
  Var out = encode(constant(image.clone()), cfg, leaves);
  return ActivationMap(out->value);
}

Tensor normalize_image(const Tensor& image01,
                       const std::vector<double>& channel_mean) {
  if (image01.rank() != 3 ||
      image01.dim(2) != static_cast<int>(channel_mean.size()))
    throw DimensionError("normalize_image: channel mean size mismatch");
  Tensor out = image01.clone();
  double* p = out.mutable_data();
  int c = image01.dim(2);
  for (size_t i = 0; i < out.size(); ++i) p[i] -= channel_mean[i % c];
  return out;
}

void save_activation_map(const ActivationMap& m, const std::string& path) {
  auto os = io::open_out(path);
  os.write("MIAM", 4);
  io::write_u16(os, kMiamVersion);
  io::write_u32(os, static_cast<uint32_t>(m.extent()));
  io::write_u32(os, static_cast<uint32_t>(m.channels()));
  uint8_t tag = io::precision_tag();
  io::write_u8(os, tag);
  io::write_values(os, m.values, tag);
  if (!os) throw IoError("write failed for '" + path + "'");
}

ActivationMap load_activation_map(const std::string& path) {
  auto is = io::open_in(path);
  io::expect_magic(is, "MIAM", "activation map");
  uint16_t ver = io::read_u16(is, "activation map version");
  if (ver != kMiamVersion)
    throw VersionError("activation map version " + std::to_string(ver) +
                       ", expected " + std::to_string(kMiamVersion));
  int k = static_cast<int>(io::read_u32(is, "activation map K"));
  int d = static_cast<int>(io::read_u32(is, "activation map D"));
  uint8_t tag = io::read_u8(is, "activation map precision tag");
  Tensor t({k, k, d});
  io::read_values(is, t, tag, "activation map payload");
  return ActivationMap(std::move(t));
}

}  // namespace migate
