#include "migate/model.hpp"

#include <sstream>

#include "migate/io.hpp"

namespace migate {

namespace {
constexpr uint16_t kCheckpointVersion = 1;
}

void ModelConfig::finalize() {
  encoder.validate();
  if (gate_embed == 0) gate_embed = encoder.out_channels;
  if (gate_embed < 1) throw DimensionError("gate embed dim must be >= 1");
  if (inter_channels == 0) inter_channels = hidden;
  if (hidden < 1 || inter_channels < 1)
    throw DimensionError("IRNN channel counts must be positive");
  if (dropout_p < 0.0 || dropout_p >= 1.0)
    throw DimensionError("dropout probability must be in [0, 1)");
  if (head_embed < 2) throw DimensionError("head embedding dim must be >= 2");
  if (context == ContextKind::stacked_conv && encoder.out_extent < 5)
    throw DimensionError("stacked_conv context requires K >= 5");
  if (context == ContextKind::spp)
    for (int l : spp.levels)
      if (l > encoder.out_extent)
        throw DimensionError("spp level exceeds encoder output extent");
}

int ModelConfig::head_in_dim() const {
  int k = encoder.out_extent, d = encoder.out_channels;
  if (context == ContextKind::spp) {
    int bins = 0;
    for (int l : spp.levels) bins += l * l;
    return bins * d;
  }
  return k * k * d;
}

ModelParams ModelParams::init(const ModelConfig& cfg, uint64_t seed) {
  ModelConfig c = cfg;
  c.finalize();
  Rng master(seed);
  ModelParams p;
  p.cfg = c;
  Rng r_enc_a = master.fork(1);
  p.enc_a = EncoderParams::init(c.encoder, r_enc_a);
  if (!c.encoder.shared_streams) {
    Rng r_enc_b = master.fork(2);
    p.enc_b = EncoderParams::init(c.encoder, r_enc_b);
  }
  Rng r_gate = master.fork(3);
  p.gate = MIGateParams::init(c.encoder.out_channels, c.gate_embed, c.fusion,
                              r_gate);
  if (c.context == ContextKind::irnn2) {
    Rng r1 = master.fork(4);
    Rng r2 = master.fork(5);
    p.irnn1 = IRNNLayerParams::init(c.encoder.out_channels, c.hidden,
                                    c.inter_channels, r1);
    p.irnn2 = IRNNLayerParams::init(c.inter_channels, c.hidden,
                                    c.encoder.out_channels, r2);
    // identity-initialized sweeps accumulate up to K cells, so shrink the
    // mix projections to keep the context on the scale of its input
    for (auto* layer : {&p.irnn1, &p.irnn2}) {
      double* w = layer->W_mix.mutable_data();
      for (size_t i = 0; i < layer->W_mix.size(); ++i)
        w[i] /= c.encoder.out_extent;
      layer->W_mix.quantize();
    }
  } else if (c.context == ContextKind::stacked_conv) {
    Rng rc = master.fork(6);
    p.conv_ctx = ConvContextParams::init(c.encoder.out_channels, rc);
  }
  Rng r_head = master.fork(7);
  p.head = HeadParams::init(c.head_in_dim(), c.head_embed, r_head);
  return p;
}

namespace {
template <typename Self, typename TensorPtr>
std::vector<std::pair<std::string, TensorPtr>> enumerate(Self& self) {
  std::vector<std::pair<std::string, TensorPtr>> out;
  auto add = [&out](const std::string& name, TensorPtr t) {
    out.emplace_back(name, t);
  };
  for (size_t i = 0; i < self.enc_a.W.size(); ++i) {
    add("enc_a.W" + std::to_string(i), &self.enc_a.W[i]);
    add("enc_a.b" + std::to_string(i), &self.enc_a.b[i]);
  }
  if (!self.cfg.encoder.shared_streams)
    for (size_t i = 0; i < self.enc_b.W.size(); ++i) {
      add("enc_b.W" + std::to_string(i), &self.enc_b.W[i]);
      add("enc_b.b" + std::to_string(i), &self.enc_b.b[i]);
    }
  add("gate.U", &self.gate.U);
  add("gate.V", &self.gate.V);
  add("gate.b_a", &self.gate.b_a);
  add("gate.b_b", &self.gate.b_b);
  add("gate.P", &self.gate.P);
  add("gate.b", &self.gate.b);
  if (self.cfg.context == ContextKind::irnn2) {
    for (int l = 0; l < 2; ++l) {
      auto& layer = l == 0 ? self.irnn1 : self.irnn2;
      std::string pre = "irnn" + std::to_string(l + 1) + ".";
      add(pre + "W_in", &layer.W_in);
      add(pre + "b_in", &layer.b_in);
      for (int d = 0; d < 4; ++d)
        add(pre + "W_hh" + std::to_string(d), &layer.W_hh[d]);
      add(pre + "W_mix", &layer.W_mix);
      add(pre + "b_mix", &layer.b_mix);
    }
  } else if (self.cfg.context == ContextKind::stacked_conv) {
    add("ctx.W1", &self.conv_ctx.W1);
    add("ctx.b1", &self.conv_ctx.b1);
    add("ctx.W2", &self.conv_ctx.W2);
    add("ctx.b2", &self.conv_ctx.b2);
  }
  add("head.W_fc", &self.head.W_fc);
  add("head.b_fc", &self.head.b_fc);
  return out;
}
}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_params() {
  return enumerate<ModelParams, Tensor*>(*this);
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_params()
    const {
  return enumerate<const ModelParams, const Tensor*>(*this);
}

size_t ModelParams::param_count() const {
  size_t n = 0;
  for (const auto& [name, t] : named_params()) n += t->size();
  return n;
}

std::string ModelParams::summary() const {
  std::ostringstream os;
  size_t enc = enc_a.param_count() +
               (cfg.encoder.shared_streams ? 0 : enc_b.param_count());
  os << "parameters\n";
  os << "  encoder (" << (cfg.encoder.shared_streams ? "shared" : "two streams")
     << "): " << enc << "\n";
  os << "  gate [" << to_string(cfg.fusion) << "]: " << gate.param_count()
     << "  (U=" << gate.U.size() << " V=" << gate.V.size()
     << " P=" << gate.P.size() << " biases=" << gate.b_a.size() + gate.b_b.size() + gate.b.size()
     << ")\n";
  size_t ctx = 0;
  if (cfg.context == ContextKind::irnn2)
    ctx = irnn1.param_count() + irnn2.param_count();
  else if (cfg.context == ContextKind::stacked_conv)
    ctx = conv_ctx.param_count();
  os << "  context [" << to_string(cfg.context) << "]: " << ctx << "\n";
  os << "  head: " << head.param_count() << "\n";
  os << "  total: " << param_count() << "\n";
  return os.str();
}

ModelLeaves ModelLeaves::from(const ModelParams& p, bool trainable) {
  ModelLeaves l;
  l.enc_a = EncoderLeaves::from(p.enc_a, trainable);
  if (!p.cfg.encoder.shared_streams)
    l.enc_b = EncoderLeaves::from(p.enc_b, trainable);
  l.gate = MIGateLeaves::from(p.gate, trainable);
  if (p.cfg.context == ContextKind::irnn2) {
    l.irnn1 = IRNNLeaves::from(p.irnn1, trainable);
    l.irnn2 = IRNNLeaves::from(p.irnn2, trainable);
  } else if (p.cfg.context == ContextKind::stacked_conv) {
    l.conv_ctx = ConvContextLeaves::from(p.conv_ctx, trainable);
  }
  l.head = HeadLeaves::from(p.head, trainable);
  return l;
}

std::vector<std::pair<std::string, Var>> ModelLeaves::named_leaves(
    const ModelConfig& cfg) const {
  std::vector<std::pair<std::string, Var>> out;
  auto add = [&out](const std::string& name, const Var& v) {
    out.emplace_back(name, v);
  };
  for (size_t i = 0; i < enc_a.W.size(); ++i) {
    add("enc_a.W" + std::to_string(i), enc_a.W[i]);
    add("enc_a.b" + std::to_string(i), enc_a.b[i]);
  }
  if (!cfg.encoder.shared_streams)
    for (size_t i = 0; i < enc_b.W.size(); ++i) {
      add("enc_b.W" + std::to_string(i), enc_b.W[i]);
      add("enc_b.b" + std::to_string(i), enc_b.b[i]);
    }
  add("gate.U", gate.U);
  add("gate.V", gate.V);
  add("gate.b_a", gate.b_a);
  add("gate.b_b", gate.b_b);
  add("gate.P", gate.P);
  add("gate.b", gate.b);
  if (cfg.context == ContextKind::irnn2) {
    for (int l = 0; l < 2; ++l) {
      const auto& layer = l == 0 ? irnn1 : irnn2;
      std::string pre = "irnn" + std::to_string(l + 1) + ".";
      add(pre + "W_in", layer.W_in);
      add(pre + "b_in", layer.b_in);
      for (int d = 0; d < 4; ++d)
        add(pre + "W_hh" + std::to_string(d), layer.W_hh[d]);
      add(pre + "W_mix", layer.W_mix);
      add(pre + "b_mix", layer.b_mix);
    }
  } else if (cfg.context == ContextKind::stacked_conv) {
    add("ctx.W1", conv_ctx.W1);
    add("ctx.b1", conv_ctx.b1);
    add("ctx.W2", conv_ctx.W2);
    add("ctx.b2", conv_ctx.b2);
  }
  add("head.W_fc", head.W_fc);
  add("head.b_fc", head.b_fc);
  return out;
}

PairOutputs pair_graph(const Var& act_a, const Var& act_b,
                       const ModelConfig& cfg, const ModelLeaves& leaves,
                       bool training, Rng* dropout_rng) {
  Var fused = mi_forward(act_a, act_b, leaves.gate, cfg.fusion);
  Var emb_a, emb_b;
  switch (cfg.context) {
    case ContextKind::irnn2: {
      Var ctx = stacked_irnn_pool(fused, leaves.irnn1, leaves.irnn2,
                                  cfg.dropout_p, training, dropout_rng);
      emb_a = residual_embed(act_a, ctx, leaves.head);
      emb_b = residual_embed(act_b, ctx, leaves.head);
      break;
    }
    case ContextKind::global_avg: {
      Var ctx = global_avg_unpool(fused);
      emb_a = residual_embed(act_a, ctx, leaves.head);
      emb_b = residual_embed(act_b, ctx, leaves.head);
      break;
    }
    case ContextKind::stacked_conv: {
      Var ctx = stacked_conv_context(fused, leaves.conv_ctx);
      emb_a = residual_embed(act_a, ctx, leaves.head);
      emb_b = residual_embed(act_b, ctx, leaves.head);
      break;
    }
    case ContextKind::spp: {
      // pooled-descriptor residuals; the spatial map has no aligned shape
      Var ctx = spp_pool(fused, cfg.spp);
      emb_a = residual_embed(spp_pool(act_a, cfg.spp), ctx, leaves.head);
      emb_b = residual_embed(spp_pool(act_b, cfg.spp), ctx, leaves.head);
      break;
    }
  }
  return {ops::cosine(emb_a, emb_b), emb_a, emb_b};
}

double pair_similarity(const Tensor& image_a, const Tensor& image_b,
                       const ModelParams& params,
                       const std::vector<double>& channel_mean) {
  auto leaves = ModelLeaves::from(params, false);
  Var act_a = constant(
      encode(normalize_image(image_a, channel_mean), params.cfg.encoder,
             params.enc_a)
          .values);
  const EncoderParams& enc_b =
      params.cfg.encoder.shared_streams ? params.enc_a : params.enc_b;
  Var act_b = constant(
      encode(normalize_image(image_b, channel_mean), params.cfg.encoder, enc_b)
          .values);
  PairOutputs out =
      pair_graph(act_a, act_b, params.cfg, leaves, /*training=*/false, nullptr);
  return out.similarity->value[0];
}

namespace {

void write_tensor(std::ostream& os, const Tensor& t, uint8_t tag) {
  io::write_u8(os, static_cast<uint8_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i)
    io::write_u32(os, static_cast<uint32_t>(t.dim(i)));
  io::write_values(os, t, tag);
}

Tensor read_tensor(std::istream& is, uint8_t tag, const std::string& what) {
  int rank = io::read_u8(is, what + " rank");
  std::vector<int> shape;
  for (int i = 0; i < rank; ++i)
    shape.push_back(static_cast<int>(io::read_u32(is, what + " dims")));
  Tensor t(shape);
  io::read_values(is, t, tag, what + " payload");
  return t;
}

void write_section(std::ostream& os, const std::string& name,
                   const std::vector<const Tensor*>& tensors, uint8_t tag) {
  std::ostringstream payload(std::ios::binary);
  io::write_u32(payload, static_cast<uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) write_tensor(payload, *t, tag);
  std::string bytes = payload.str();
  io::write_u8(os, static_cast<uint8_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  io::write_u64(os, bytes.size());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<Tensor> read_section(std::istream& is, const std::string& expected,
                                 uint8_t tag) {
  int namelen = io::read_u8(is, "section name length");
  std::string name(static_cast<size_t>(namelen), '\0');
  is.read(name.data(), namelen);
  if (is.gcount() != namelen)
    throw TruncatedError("truncated file while reading section name");
  if (name != expected)
    throw IoError("checkpoint section '" + name + "', expected '" + expected +
                  "'");
  uint64_t len = io::read_u64(is, "section length");
  (void)len;
  uint32_t count = io::read_u32(is, "section tensor count");
  std::vector<Tensor> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i)
    out.push_back(read_tensor(is, tag, "section " + expected));
  return out;
}

void assign_checked(Tensor& dst, const Tensor& src, const std::string& what) {
  if (!dst.same_shape(src))
    throw DimensionError("checkpoint/config mismatch: " + what + " is " +
                         src.shape_str() + ", configured " + dst.shape_str());
  dst = src;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::vector<Tensor>& optimizer_state,
                     const std::vector<double>& channel_mean) {
  auto os = io::open_out(path);
  os.write("MICK", 4);
  io::write_u16(os, kCheckpointVersion);
  uint8_t tag = io::precision_tag();
  io::write_u8(os, tag);

  std::vector<const Tensor*> enc;
  for (size_t i = 0; i < params.enc_a.W.size(); ++i) {
    enc.push_back(&params.enc_a.W[i]);
    enc.push_back(&params.enc_a.b[i]);
  }
  if (!params.cfg.encoder.shared_streams)
    for (size_t i = 0; i < params.enc_b.W.size(); ++i) {
      enc.push_back(&params.enc_b.W[i]);
      enc.push_back(&params.enc_b.b[i]);
    }
  Tensor mean = Tensor::from({static_cast<int>(channel_mean.size())},
                             std::vector<double>(channel_mean));
  enc.push_back(&mean);
  write_section(os, "encoder", enc, tag);

  write_section(os, "gate",
                {&params.gate.U, &params.gate.V, &params.gate.b_a,
                 &params.gate.b_b, &params.gate.P, &params.gate.b},
                tag);

  std::vector<const Tensor*> s1, s2;
  if (params.cfg.context == ContextKind::irnn2) {
    for (const auto* layer : {&params.irnn1, &params.irnn2}) {
      auto& dst = layer == &params.irnn1 ? s1 : s2;
      dst = {&layer->W_in, &layer->b_in, &layer->W_hh[0], &layer->W_hh[1],
             &layer->W_hh[2], &layer->W_hh[3], &layer->W_mix, &layer->b_mix};
    }
  } else if (params.cfg.context == ContextKind::stacked_conv) {
    s1 = {&params.conv_ctx.W1, &params.conv_ctx.b1};
    s2 = {&params.conv_ctx.W2, &params.conv_ctx.b2};
  }
  write_section(os, "irnn1", s1, tag);
  write_section(os, "irnn2", s2, tag);
  write_section(os, "head", {&params.head.W_fc, &params.head.b_fc}, tag);

  std::vector<const Tensor*> opt;
  for (const auto& t : optimizer_state) opt.push_back(&t);
  write_section(os, "optimizer", opt, tag);
  if (!os) throw IoError("write failed for '" + path + "'");
}

void load_checkpoint(const std::string& path, ModelParams& params,
                     std::vector<Tensor>& optimizer_state,
                     std::vector<double>& channel_mean) {
  auto is = io::open_in(path);
  io::expect_magic(is, "MICK", "checkpoint");
  uint16_t ver = io::read_u16(is, "checkpoint version");
  if (ver != kCheckpointVersion)
    throw VersionError("checkpoint version " + std::to_string(ver) +
                       ", expected " + std::to_string(kCheckpointVersion));
  uint8_t tag = io::read_u8(is, "checkpoint precision tag");

  auto enc = read_section(is, "encoder", tag);
  size_t per_stream = 2 * params.enc_a.W.size();
  size_t expected =
      per_stream * (params.cfg.encoder.shared_streams ? 1 : 2) + 1;
  if (enc.size() != expected)
    throw DimensionError("checkpoint/config mismatch: encoder section has " +
                         std::to_string(enc.size()) + " tensors, expected " +
                         std::to_string(expected));
  size_t k = 0;
  for (size_t i = 0; i < params.enc_a.W.size(); ++i) {
    assign_checked(params.enc_a.W[i], enc[k++], "enc_a.W" + std::to_string(i));
    assign_checked(params.enc_a.b[i], enc[k++], "enc_a.b" + std::to_string(i));
  }
  if (!params.cfg.encoder.shared_streams)
    for (size_t i = 0; i < params.enc_b.W.size(); ++i) {
      assign_checked(params.enc_b.W[i], enc[k++], "enc_b.W" + std::to_string(i));
      assign_checked(params.enc_b.b[i], enc[k++], "enc_b.b" + std::to_string(i));
    }
  channel_mean.assign(enc[k].data(), enc[k].data() + enc[k].size());

  auto gate = read_section(is, "gate", tag);
  if (gate.size() != 6)
    throw DimensionError("checkpoint/config mismatch: gate section");
  assign_checked(params.gate.U, gate[0], "gate.U");
  assign_checked(params.gate.V, gate[1], "gate.V");
  assign_checked(params.gate.b_a, gate[2], "gate.b_a");
  assign_checked(params.gate.b_b, gate[3], "gate.b_b");
  assign_checked(params.gate.P, gate[4], "gate.P");
  assign_checked(params.gate.b, gate[5], "gate.b");

  auto s1 = read_section(is, "irnn1", tag);
  auto s2 = read_section(is, "irnn2", tag);
  if (params.cfg.context == ContextKind::irnn2) {
    for (auto* layer : {&params.irnn1, &params.irnn2}) {
      auto& src = layer == &params.irnn1 ? s1 : s2;
      if (src.size() != 8)
        throw DimensionError("checkpoint/config mismatch: IRNN section");
      assign_checked(layer->W_in, src[0], "irnn.W_in");
      assign_checked(layer->b_in, src[1], "irnn.b_in");
      for (int d = 0; d < 4; ++d)
        assign_checked(layer->W_hh[d], src[2 + d], "irnn.W_hh");
      assign_checked(layer->W_mix, src[6], "irnn.W_mix");
      assign_checked(layer->b_mix, src[7], "irnn.b_mix");
    }
  } else if (params.cfg.context == ContextKind::stacked_conv) {
    if (s1.size() != 2 || s2.size() != 2)
      throw DimensionError("checkpoint/config mismatch: conv context section");
    assign_checked(params.conv_ctx.W1, s1[0], "ctx.W1");
    assign_checked(params.conv_ctx.b1, s1[1], "ctx.b1");
    assign_checked(params.conv_ctx.W2, s2[0], "ctx.W2");
    assign_checked(params.conv_ctx.b2, s2[1], "ctx.b2");
  } else if (!s1.empty() || !s2.empty()) {
    throw DimensionError(
        "checkpoint/config mismatch: context sections not empty for " +
        to_string(params.cfg.context));
  }

  auto head = read_section(is, "head", tag);
  if (head.size() != 2)
    throw DimensionError("checkpoint/config mismatch: head section");
  assign_checked(params.head.W_fc, head[0], "head.W_fc");
  assign_checked(params.head.b_fc, head[1], "head.b_fc");

  optimizer_state = read_section(is, "optimizer", tag);
}

}  // namespace migate
