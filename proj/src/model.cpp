#include "sodyolo/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sodyolo/ops.hpp"

namespace sodyolo {

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  if (input_size == 0 || input_size % 32 != 0) {
    throw std::invalid_argument("model: input_size must be a positive multiple of 32, got " +
                                std::to_string(input_size));
  }
  if (num_classes < 1) throw std::invalid_argument("model: num_classes must be >= 1");
  for (auto w : widths) {
    if (w < 2) throw std::invalid_argument("model: every width must be >= 2");
  }
  if (c2f_depth < 1) throw std::invalid_argument("model: c2f_depth must be >= 1");
  if (neck_channels < 2 || head_channels < 1) {
    throw std::invalid_argument("model: neck_channels must be >= 2 and head_channels >= 1");
  }
  if (attention_reduction < 1 || neck_channels % attention_reduction != 0) {
    throw std::invalid_argument("model: neck_channels " + std::to_string(neck_channels) +
                                " not divisible by attention_reduction " +
                                std::to_string(attention_reduction));
  }
  if (attention_kernel % 2 == 0) throw std::invalid_argument("model: attention_kernel must be odd");
}

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.input_size = 640;
  c.widths = {32, 64, 128, 256};
  c.neck_channels = 64;
  c.head_channels = 64;
  return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  if (name == "toy") return toy();
  if (name == "full") return full();
  throw std::invalid_argument("model: unknown preset '" + name + "' (expected toy or full)");
}

void ModelConfig::apply(const KeyValueConfig& kv) {
  if (auto p = kv.raw("model.preset")) *this = preset(*p);
  input_size = static_cast<std::size_t>(kv.get_int("model.input_size", static_cast<long long>(input_size)));
  num_classes = static_cast<std::size_t>(kv.get_int("model.num_classes", static_cast<long long>(num_classes)));
  const auto w = kv.get_int_list("model.widths", {static_cast<long long>(widths[0]),
                                                  static_cast<long long>(widths[1]),
                                                  static_cast<long long>(widths[2]),
                                                  static_cast<long long>(widths[3])});
  if (w.size() != kNumLevels) throw std::invalid_argument("model.widths needs exactly 4 entries");
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    if (w[i] < 1) throw std::invalid_argument("model.widths entries must be positive");
    widths[i] = static_cast<std::size_t>(w[i]);
  }
  c2f_depth = static_cast<std::size_t>(kv.get_int("model.c2f_depth", static_cast<long long>(c2f_depth)));
  neck_channels = static_cast<std::size_t>(kv.get_int("model.neck_channels", static_cast<long long>(neck_channels)));
  head_channels = static_cast<std::size_t>(kv.get_int("model.head_channels", static_cast<long long>(head_channels)));
  attention_reduction = static_cast<std::size_t>(
      kv.get_int("model.attention_reduction", static_cast<long long>(attention_reduction)));
  attention_kernel = static_cast<std::size_t>(
      kv.get_int("model.attention_kernel", static_cast<long long>(attention_kernel)));
  conf_threshold = kv.get_double("model.conf_threshold", conf_threshold);
  validate();
}

void ModelConfig::store(KeyValueConfig& kv) const {
  kv.set("model.input_size", std::to_string(input_size));
  kv.set("model.num_classes", std::to_string(num_classes));
  kv.set("model.widths", std::to_string(widths[0]) + "," + std::to_string(widths[1]) + "," +
                             std::to_string(widths[2]) + "," + std::to_string(widths[3]));
  kv.set("model.c2f_depth", std::to_string(c2f_depth));
  kv.set("model.neck_channels", std::to_string(neck_channels));
  kv.set("model.head_channels", std::to_string(head_channels));
  kv.set("model.attention_reduction", std::to_string(attention_reduction));
  kv.set("model.attention_kernel", std::to_string(attention_kernel));
  kv.set("model.conf_threshold", format_double(conf_threshold));
}

// ---------------------------------------------------------------- blocks

void C2fParams::visit(const ParamVisitor& f, const std::string& prefix) {
  cv1.visit(f, prefix + ".cv1");
  for (std::size_t i = 0; i < bottlenecks.size(); ++i) {
    bottlenecks[i].first.visit(f, prefix + ".m" + std::to_string(i) + ".cv1");
    bottlenecks[i].second.visit(f, prefix + ".m" + std::to_string(i) + ".cv2");
  }
  cv2.visit(f, prefix + ".cv2");
}

void C2fParams::visit_buffers(const BufferVisitor& f, const std::string& prefix) {
  cv1.visit_buffers(f, prefix + ".cv1");
  for (std::size_t i = 0; i < bottlenecks.size(); ++i) {
    bottlenecks[i].first.visit_buffers(f, prefix + ".m" + std::to_string(i) + ".cv1");
    bottlenecks[i].second.visit_buffers(f, prefix + ".m" + std::to_string(i) + ".cv2");
  }
  cv2.visit_buffers(f, prefix + ".cv2");
}

C2fParams make_c2f(Rng& rng, std::size_t cin, std::size_t cout, std::size_t depth) {
  if (depth < 1) throw std::invalid_argument("c2f: depth must be >= 1");
  if (cout < 2) {
    throw std::invalid_argument("c2f: output channels " + std::to_string(cout) +
                                " too small to split into two halves");
  }
  const std::size_t h = cout / 2;
  C2fParams p;
  p.cv1 = make_conv_bn(rng, cin, 2 * h, 1);
  for (std::size_t i = 0; i < depth; ++i) {
    ConvBnParams a = make_conv_bn(rng, h, h, 3);
    ConvBnParams b = make_conv_bn(rng, h, h, 3);
    p.bottlenecks.emplace_back(std::move(a), std::move(b));
  }
  p.cv2 = make_conv_bn(rng, (2 + depth) * h, cout, 1);
  return p;
}

Tensor c2f(const Tensor& x, const C2fParams& p, bool training) {
  if (p.bottlenecks.empty()) throw std::invalid_argument("c2f: depth must be >= 1");
  const std::size_t h = p.hidden();
  if (h < 1) throw std::invalid_argument("c2f: channel count too small to split");
  Tensor y = conv_act(x, p.cv1, 1, training);
  std::vector<Tensor> parts{nn::slice_channels(y, 0, h), nn::slice_channels(y, h, h)};
  Tensor cur = parts.back();
  for (const auto& [a, b] : p.bottlenecks) {
    cur = nn::add(cur, conv_act(conv_act(cur, a, 1, training), b, 1, training));
    parts.push_back(cur);
  }
  return conv_act(nn::concat_channels(parts), p.cv2, 1, training);
}

void SppfParams::visit(const ParamVisitor& f, const std::string& prefix) {
  cv1.visit(f, prefix + ".cv1");
  cv2.visit(f, prefix + ".cv2");
}

void SppfParams::visit_buffers(const BufferVisitor& f, const std::string& prefix) {
  cv1.visit_buffers(f, prefix + ".cv1");
  cv2.visit_buffers(f, prefix + ".cv2");
}

SppfParams make_sppf(Rng& rng, std::size_t cin, std::size_t cout) {
  const std::size_t h = std::max<std::size_t>(1, cin / 2);
  SppfParams p;
  p.cv1 = make_conv_bn(rng, cin, h, 1);
  p.cv2 = make_conv_bn(rng, 4 * h, cout, 1);
  return p;
}

Tensor sppf(const Tensor& x, const SppfParams& p, bool training) {
  Tensor r = conv_act(x, p.cv1, 1, training);
  Tensor p1 = nn::maxpool2d(r, 5, 1, 2);
  Tensor p2 = nn::maxpool2d(p1, 5, 1, 2);
  Tensor p3 = nn::maxpool2d(p2, 5, 1, 2);
  return conv_act(nn::concat_channels({r, p1, p2, p3}), p.cv2, 1, training);
}

void BackboneParams::visit(const ParamVisitor& f, const std::string& prefix) {
  stem.visit(f, prefix + ".stem");
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    down[i].visit(f, prefix + ".down" + std::to_string(i + 2));
    stage[i].visit(f, prefix + ".c2f" + std::to_string(i + 2));
  }
  sppf.visit(f, prefix + ".sppf");
}

void BackboneParams::visit_buffers(const BufferVisitor& f, const std::string& prefix) {
  stem.visit_buffers(f, prefix + ".stem");
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    down[i].visit_buffers(f, prefix + ".down" + std::to_string(i + 2));
    stage[i].visit_buffers(f, prefix + ".c2f" + std::to_string(i + 2));
  }
  sppf.visit_buffers(f, prefix + ".sppf");
}

void NeckParams::visit(const ParamVisitor& f, const std::string& prefix) {
  topdown4.visit(f, prefix + ".topdown4");
  topdown3.visit(f, prefix + ".topdown3");
  topdown2.visit(f, prefix + ".topdown2");
  scalseq3.visit(f, prefix + ".scalseq3");
  scalseq2.visit(f, prefix + ".scalseq2");
  attention3.visit(f, prefix + ".attention3");
  attention2.visit(f, prefix + ".attention2");
  down3.visit(f, prefix + ".down3");
  down4.visit(f, prefix + ".down4");
  bottomup4.visit(f, prefix + ".bottomup4");
  bottomup5.visit(f, prefix + ".bottomup5");
}

void NeckParams::visit_buffers(const BufferVisitor& f, const std::string& prefix) {
  topdown4.visit_buffers(f, prefix + ".topdown4");
  topdown3.visit_buffers(f, prefix + ".topdown3");
  topdown2.visit_buffers(f, prefix + ".topdown2");
  scalseq3.visit_buffers(f, prefix + ".scalseq3");
  scalseq2.visit_buffers(f, prefix + ".scalseq2");
  down3.visit_buffers(f, prefix + ".down3");
  down4.visit_buffers(f, prefix + ".down4");
  bottomup4.visit_buffers(f, prefix + ".bottomup4");
  bottomup5.visit_buffers(f, prefix + ".bottomup5");
}

void HeadParams::visit(const ParamVisitor& f, const std::string& prefix) {
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    const std::string p = prefix + ".p" + std::to_string(i + 2);
    levels[i].conv1.visit(f, p + ".conv1");
    levels[i].conv2.visit(f, p + ".conv2");
    levels[i].pred.visit(f, p + ".pred");
  }
}

void HeadParams::visit_buffers(const BufferVisitor& f, const std::string& prefix) {
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    const std::string p = prefix + ".p" + std::to_string(i + 2);
    levels[i].conv1.visit_buffers(f, p + ".conv1");
    levels[i].conv2.visit_buffers(f, p + ".conv2");
  }
}

// ---------------------------------------------------------------- model

Model Model::create(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Model m;
  m.config = cfg;
  const auto& w = cfg.widths;
  const std::size_t nc = cfg.neck_channels;
  const std::size_t stem = std::max<std::size_t>(1, w[0] / 2);

  auto& bb = m.backbone;
  bb.stem = make_conv_bn(rng, 3, stem, 3);
  std::size_t prev = stem;
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    bb.down[i] = make_conv_bn(rng, prev, w[i], 3);
    bb.stage[i] = make_c2f(rng, w[i], w[i], cfg.c2f_depth);
    prev = w[i];
  }
  bb.sppf = make_sppf(rng, w[3], w[3]);

  auto& nk = m.neck;
  nk.topdown4 = make_c2f(rng, w[3] + w[2], w[2], cfg.c2f_depth);
  nk.topdown3 = make_c2f(rng, w[2] + w[1], nc, cfg.c2f_depth);
  nk.topdown2 = make_c2f(rng, nc + w[0], nc, cfg.c2f_depth);
  nk.scalseq3 = asf::make_scalseq_params(rng, {nc, w[2], w[3]}, nc);
  nk.scalseq2 = asf::make_scalseq_params(rng, {nc, nc, w[2]}, nc);
  nk.attention3 = asf::make_attention_params(rng, nc, cfg.attention_reduction, cfg.attention_kernel);
  nk.attention2 = asf::make_attention_params(rng, nc, cfg.attention_reduction, cfg.attention_kernel);
  nk.down3 = make_conv_bn(rng, nc, nc, 3);
  nk.bottomup4 = make_c2f(rng, nc + w[2], w[2], cfg.c2f_depth);
  nk.down4 = make_conv_bn(rng, w[2], w[2], 3);
  nk.bottomup5 = make_c2f(rng, w[2] + w[3], w[3], cfg.c2f_depth);

  const std::array<std::size_t, kNumLevels> level_ch{nc, nc, w[2], w[3]};
  const std::size_t out_ch = kBoxChannels + cfg.num_classes;
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    auto& h = m.head.levels[i];
    h.conv1 = make_conv_bn(rng, level_ch[i], cfg.head_channels, 3);
    h.conv2 = make_conv_bn(rng, cfg.head_channels, cfg.head_channels, 3);
    h.pred = make_conv(rng, cfg.head_channels, out_ch, 1);
    // Small prediction weights and a low objectness / class prior.
    for (auto& v : h.pred.weight.data()) v *= 0.1;
    auto b = h.pred.bias.data();
    b[4] = -4.0;
    for (std::size_t c = 0; c < cfg.num_classes; ++c) b[kBoxChannels + c] = -2.0;
  }
  m.visit([](const std::string&, Tensor& t, bool) { t.set_requires_grad(true); });
  return m;
}

void Model::visit(const ParamVisitor& f) {
  backbone.visit(f, "backbone");
  neck.visit(f, "neck");
  head.visit(f, "head");
}

void Model::visit_buffers(const BufferVisitor& f) {
  backbone.visit_buffers(f, "backbone");
  neck.visit_buffers(f, "neck");
  head.visit_buffers(f, "head");
}

std::size_t count_params(Model& m) {
  std::size_t n = 0;
  m.visit([&n](const std::string&, Tensor& t, bool) { n += t.numel(); });
  return n;
}

Model Model::clone() const {
  Model copy = *this;
  copy.visit([](const std::string&, Tensor& t, bool) {
    if (t.defined()) t = t.clone();
  });
  return copy;
}

FeaturePyramid backbone_forward(const Tensor& images, const BackboneParams& p,
                                const ModelConfig& cfg, bool training) {
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg.input_size ||
      images.dim(3) != cfg.input_size) {
    throw std::invalid_argument("backbone: expected images (N,3," + std::to_string(cfg.input_size) +
                                "," + std::to_string(cfg.input_size) + "), got " +
                                shape_str(images.shape()));
  }
  Tensor x = conv_act(images, p.stem, 2, training);
  std::array<Tensor, kNumLevels> maps;
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    x = c2f(conv_act(x, p.down[i], 2, training), p.stage[i], training);
    maps[i] = x;
  }
  maps[3] = sppf(maps[3], p.sppf, training);
  return {maps[0], maps[1], maps[2], maps[3]};
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("neck stage ") + name + ": " + e.what());
  }
}

}  // namespace

NeckOutputs neck_forward(const FeaturePyramid& pyr, NeckParams& p, asf::Mode mode) {
  const bool tr = mode == asf::Mode::kTraining;
  const Tensor& p5 = pyr.c5;
  Tensor p4 = stage("topdown4", [&] {
    return c2f(nn::concat_channels({nn::upsample_nearest(p5, 2), pyr.c4}), p.topdown4, tr);
  });
  Tensor p3 = stage("topdown3", [&] {
    return c2f(nn::concat_channels({nn::upsample_nearest(p4, 2), pyr.c3}), p.topdown3, tr);
  });
  Tensor p2 = stage("topdown2", [&] {
    return c2f(nn::concat_channels({nn::upsample_nearest(p3, 2), pyr.c2}), p.topdown2, tr);
  });
  Tensor n3 = stage("asf3", [&] {
    return asf::attention_model(asf::scalseq(p3, p4, p5, p.scalseq3, mode), p3, p.attention3);
  });
  Tensor n2 = stage("asf2", [&] {
    return asf::attention_model(asf::scalseq(p2, p3, p4, p.scalseq2, mode), p2, p.attention2);
  });
  Tensor n4 = stage("bottomup4", [&] {
    return c2f(nn::concat_channels({conv_act(n3, p.down3, 2, tr), p4}), p.bottomup4, tr);
  });
  Tensor n5 = stage("bottomup5", [&] {
    return c2f(nn::concat_channels({conv_act(n4, p.down4, 2, tr), p5}), p.bottomup5, tr);
  });
  return {n2, n3, n4, n5};
}

NeckOutputs neck_forward(const FeaturePyramid& pyr, const NeckParams& p) {
  NeckParams view = p;  // tensors shared; running statistics copied
  return neck_forward(pyr, view, asf::Mode::kInference);
}

RawHeadOutput head_forward(const NeckOutputs& neck, const HeadParams& p, bool training) {
  const std::array<const Tensor*, kNumLevels> ins{&neck.n2, &neck.n3, &neck.n4, &neck.n5};
  RawHeadOutput out;
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    const auto& h = p.levels[i];
    out.levels[i] =
        conv_linear(conv_act(conv_act(*ins[i], h.conv1, 1, training), h.conv2, 1, training), h.pred);
  }
  return out;
}

RawHeadOutput Model::forward_train(const Tensor& images) {
  FeaturePyramid pyr = backbone_forward(images, backbone, config, true);
  return head_forward(neck_forward(pyr, neck, asf::Mode::kTraining), head, true);
}

RawHeadOutput Model::forward(const Tensor& images) const {
  FeaturePyramid pyr = backbone_forward(images, backbone, config);
  return head_forward(neck_forward(pyr, neck), head);
}

// ---------------------------------------------------------------- decode

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

Box decode_box(const BoxTarget& t, std::size_t stride, std::size_t row, std::size_t col) {
  const double s = static_cast<double>(stride);
  const double cx = (static_cast<double>(col) + sigmoid(t.tx)) * s;
  const double cy = (static_cast<double>(row) + sigmoid(t.ty)) * s;
  const double w = std::exp(std::min(t.tw, kSizeLogitClamp)) * s;
  const double h = std::exp(std::min(t.th, kSizeLogitClamp)) * s;
  return Box::from_center(cx, cy, w, h);
}

BoxTarget encode_box(const Box& box, std::size_t stride, std::size_t row, std::size_t col) {
  constexpr double kEdge = 1e-6;
  const double s = static_cast<double>(stride);
  const double fx = std::clamp(box.cx() / s - static_cast<double>(col), kEdge, 1.0 - kEdge);
  const double fy = std::clamp(box.cy() / s - static_cast<double>(row), kEdge, 1.0 - kEdge);
  return {logit(fx), logit(fy), std::log(box.width() / s), std::log(box.height() / s)};
}

std::vector<std::vector<Detection>> decode(const RawHeadOutput& raw, const ModelConfig& cfg) {
  const std::size_t batch = raw.levels[0].dim(0);
  const std::size_t k = cfg.num_classes;
  const double limit = static_cast<double>(cfg.input_size);
  std::vector<std::vector<Detection>> out(batch);
  for (std::size_t lvl = 0; lvl < kNumLevels; ++lvl) {
    const Tensor& t = raw.levels[lvl];
    if (t.rank() != 4 || t.dim(1) != kBoxChannels + k) {
      throw std::invalid_argument("decode: level " + std::to_string(lvl) + " has shape " +
                                  shape_str(t.shape()) + ", expected " +
                                  std::to_string(kBoxChannels + k) + " channels");
    }
    const std::size_t h = t.dim(2), w = t.dim(3), hw = h * w;
    const auto d = t.data();
    for (std::size_t n = 0; n < batch; ++n) {
      const double* base = d.data() + n * (kBoxChannels + k) * hw;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const std::size_t cell = i * w + j;
          std::size_t best = 0;
          double best_logit = base[kBoxChannels * hw + cell];
          for (std::size_t c = 1; c < k; ++c) {
            const double v = base[(kBoxChannels + c) * hw + cell];
            if (v > best_logit) {
              best_logit = v;
              best = c;
            }
          }
          const double score = sigmoid(base[4 * hw + cell]) * sigmoid(best_logit);
          if (!(score >= cfg.conf_threshold)) continue;
          const BoxTarget bt{base[cell], base[hw + cell], base[2 * hw + cell], base[3 * hw + cell]};
          Box b = decode_box(bt, kHeadStrides[lvl], i, j);
          b.x1 = std::clamp(b.x1, 0.0, limit);
          b.y1 = std::clamp(b.y1, 0.0, limit);
          b.x2 = std::clamp(b.x2, 0.0, limit);
          b.y2 = std::clamp(b.y2, 0.0, limit);
          if (!b.valid()) continue;
          out[n].push_back({b, static_cast<int>(best), score});
        }
      }
    }
  }
  return out;
}

}  // namespace sodyolo
