#pragma once

// Toy-width SOD-YOLO style detector: CSP-style backbone, ASF neck with two
// ScalSeq fusions and attention refinement, an extra stride-4 (P2) level, and
// four anchor-free heads.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sodyolo/asf.hpp"
#include "sodyolo/box.hpp"
#include "sodyolo/config.hpp"
#include "sodyolo/layers.hpp"
#include "sodyolo/tensor.hpp"

namespace sodyolo {

inline constexpr std::size_t kNumLevels = 4;
inline constexpr std::array<std::size_t, kNumLevels> kHeadStrides{4, 8, 16, 32};
// Channels per head cell before the class logits: tx, ty, tw, th, objectness.
inline constexpr std::size_t kBoxChannels = 5;
inline constexpr double kSizeLogitClamp = 8.0;

struct ModelConfig {
  std::size_t input_size = 64;
  std::size_t num_classes = 10;
  // Channels at strides 4 / 8 / 16 / 32.
  std::array<std::size_t, kNumLevels> widths{16, 32, 64, 128};
  std::size_t c2f_depth = 1;
  // ScalSeq c_out; also the width of the P2/P3 neck paths.
  std::size_t neck_channels = 32;
  // Hidden width of the two 3x3 convs in every head.
  std::size_t head_channels = 16;
  std::size_t attention_reduction = asf::kDefaultReduction;
  std::size_t attention_kernel = asf::kDefaultSpatialKernel;
  double conf_threshold = 0.001;

  // Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;

  static ModelConfig toy();
  // 640x640 input with the widths used for the shape examples.
  static ModelConfig full();
  static ModelConfig preset(const std::string& name);

  // Keys under "model." in a KeyValueConfig.
  void apply(const KeyValueConfig& kv);
  void store(KeyValueConfig& kv) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct C2fParams {
  ConvBnParams cv1;  // 1x1: Cin -> 2h
  std::vector<std::pair<ConvBnParams, ConvBnParams>> bottlenecks;  // 3x3 h -> h, twice
  ConvBnParams cv2;  // 1x1: (2 + depth) h -> Cout

  std::size_t hidden() const { return cv1.out_channels() / 2; }
  void visit(const ParamVisitor& f, const std::string& prefix);
  void visit_buffers(const BufferVisitor& f, const std::string& prefix);
};

C2fParams make_c2f(Rng& rng, std::size_t cin, std::size_t cout, std::size_t depth);

struct SppfParams {
  ConvBnParams cv1;  // 1x1: C -> C/2
  ConvBnParams cv2;  // 1x1: 4 * C/2 -> Cout
  void visit(const ParamVisitor& f, const std::string& prefix);
  void visit_buffers(const BufferVisitor& f, const std::string& prefix);
};

SppfParams make_sppf(Rng& rng, std::size_t cin, std::size_t cout);

struct BackboneParams {
  ConvBnParams stem;
  std::array<ConvBnParams, kNumLevels> down;
  std::array<C2fParams, kNumLevels> stage;
  SppfParams sppf;
  void visit(const ParamVisitor& f, const std::string& prefix);
  void visit_buffers(const BufferVisitor& f, const std::string& prefix);
};

struct NeckParams {
  C2fParams topdown4, topdown3, topdown2;
  asf::ScalSeqParams scalseq3, scalseq2;
  asf::AttentionParams attention3, attention2;
  ConvBnParams down3, down4;
  C2fParams bottomup4, bottomup5;
  void visit(const ParamVisitor& f, const std::string& prefix);
  void visit_buffers(const BufferVisitor& f, const std::string& prefix);
};

struct HeadLevelParams {
  ConvBnParams conv1, conv2;
  ConvParams pred;
};

struct HeadParams {
  std::array<HeadLevelParams, kNumLevels> levels;
  void visit(const ParamVisitor& f, const std::string& prefix);
  void visit_buffers(const BufferVisitor& f, const std::string& prefix);
};

// Backbone maps at strides 4, 8, 16, 32.
struct FeaturePyramid {
  Tensor c2, c3, c4, c5;
};

struct NeckOutputs {
  Tensor n2, n3, n4, n5;
};

// Per level (N, 5 + K, S/stride, S/stride): tx, ty, tw, th, objectness logit,
// then K class logits.
struct RawHeadOutput {
  std::array<Tensor, kNumLevels> levels;
};

struct Model {
  ModelConfig config;
  BackboneParams backbone;
  NeckParams neck;
  HeadParams head;

  static Model create(const ModelConfig& config, std::uint64_t seed);

  void visit(const ParamVisitor& f);
  void visit_buffers(const BufferVisitor& f);

  // Training forward: batch-norm uses batch statistics and updates running stats.
  RawHeadOutput forward_train(const Tensor& images);
  // Inference forward; never mutates the model.
  RawHeadOutput forward(const Tensor& images) const;

  // Deep copy of every parameter and buffer.
  Model clone() const;
};

template <typename Params>
std::size_t count_params(Params& p) {
  std::size_t n = 0;
  p.visit([&n](const std::string&, Tensor& t, bool) { n += t.numel(); }, "");
  return n;
}

std::size_t count_params(Model& m);

// `training` selects batch statistics (and updates running statistics).
Tensor c2f(const Tensor& x, const C2fParams& p, bool training = false);
Tensor sppf(const Tensor& x, const SppfParams& p, bool training = false);
FeaturePyramid backbone_forward(const Tensor& images, const BackboneParams& p,
                                const ModelConfig& cfg, bool training = false);
NeckOutputs neck_forward(const FeaturePyramid& pyr, NeckParams& p, asf::Mode mode);
NeckOutputs neck_forward(const FeaturePyramid& pyr, const NeckParams& p);
RawHeadOutput head_forward(const NeckOutputs& neck, const HeadParams& p, bool training = false);

// Decodes every cell with score >= cfg.conf_threshold; one list per image.
std::vector<std::vector<Detection>> decode(const RawHeadOutput& raw, const ModelConfig& cfg);

struct BoxTarget {
  double tx = 0.0, ty = 0.0, tw = 0.0, th = 0.0;  // regression logits
};

// Logits that decode to `box` at cell (row, col) of a level with `stride`.
// The center offset is clamped into the open cell interval.
BoxTarget encode_box(const Box& box, std::size_t stride, std::size_t row, std::size_t col);
Box decode_box(const BoxTarget& t, std::size_t stride, std::size_t row, std::size_t col);

}  // namespace sodyolo
