#pragma once

// Attentional scale-sequence fusion: the ScalSeq block that fuses three
// pyramid levels along a scale axis, and the two-input attention refinement
// (channel attention on the first input, add the second, local attention).

#include <array>
#include <cstddef>
#include <string>

#include "sodyolo/layers.hpp"
#include "sodyolo/ops.hpp"
#include "sodyolo/rng.hpp"
#include "sodyolo/tensor.hpp"

namespace sodyolo::asf {

inline constexpr std::size_t kDefaultFusionChannels = 64;
inline constexpr std::size_t kDefaultReduction = 4;
inline constexpr std::size_t kDefaultSpatialKernel = 7;

enum class Mode { kInference, kTraining };

struct ScalSeqParams {
  std::array<ConvParams, 3> unify;  // 1x1, one per input level
  Tensor fuse_weight;               // (c_out, c_out, 1, 1, 1)
  Tensor fuse_bias;                 // (c_out)
  Tensor bn_gamma;                  // (c_out)
  Tensor bn_beta;                   // (c_out)
  nn::RunningStats bn_stats;
  double bn_eps = nn::kBatchNormEps;
  double slope = nn::kLeakySlope;
  std::size_t c_out = kDefaultFusionChannels;

  void visit(const ParamVisitor& f, const std::string& prefix);
  void visit_buffers(const BufferVisitor& f, const std::string& prefix);
};

ScalSeqParams make_scalseq_params(Rng& rng, const std::array<std::size_t, 3>& in_channels,
                                  std::size_t c_out = kDefaultFusionChannels);

// Inputs at spatial sizes (H,W), (H/2,W/2), (H/4,W/4); output (N, c_out, H, W).
// Scale order in the stack is [p_small, p_mid, p_large].
Tensor scalseq(const Tensor& p_small, const Tensor& p_mid, const Tensor& p_large,
               ScalSeqParams& params, Mode mode);
// Inference mode without touching the caller's running statistics.
Tensor scalseq(const Tensor& p_small, const Tensor& p_mid, const Tensor& p_large,
               const ScalSeqParams& params);

struct AttentionParams {
  // Squeeze-excitation gate: C -> C/r -> C.
  Tensor fc1_weight;  // (C/r, C)
  Tensor fc1_bias;    // (C/r)
  Tensor fc2_weight;  // (C, C/r)
  Tensor fc2_bias;    // (C)
  // Spatial gate over [channel mean, channel max].
  ConvParams spatial;  // (1, 2, k, k)
  std::size_t channels = 0;
  std::size_t reduction = kDefaultReduction;
  double slope = nn::kLeakySlope;

  void visit(const ParamVisitor& f, const std::string& prefix);
};

AttentionParams make_attention_params(Rng& rng, std::size_t channels,
                                      std::size_t reduction = kDefaultReduction,
                                      std::size_t kernel = kDefaultSpatialKernel);

Tensor channel_attention(const Tensor& x, const AttentionParams& params);
Tensor local_attention(const Tensor& x, const AttentionParams& params);
// local_attention(channel_attention(x1) + x2)
Tensor attention_model(const Tensor& x1, const Tensor& x2, const AttentionParams& params);

}  // namespace sodyolo::asf
