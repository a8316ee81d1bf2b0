#pragma once

// Differentiable primitives. Feature maps are rank-4 (N, C, H, W) tensors;
// scale stacks are rank-5 (N, S=3, C, H, W). Every op records an analytic
// backward rule when gradient tracking is active.

#include <cstddef>
#include <vector>

#include "sodyolo/tensor.hpp"

namespace sodyolo::nn {

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr std::size_t kNumScales = 3;

// Running statistics owned by the enclosing model; mutated only in training.
struct RunningStats {
  std::vector<double> mean;
  std::vector<double> var;
  double momentum = kBatchNormMomentum;

  RunningStats() = default;
  explicit RunningStats(std::size_t channels, double momentum = kBatchNormMomentum)
      : mean(channels, 0.0), var(channels, 1.0), momentum(momentum) {}
};

// Cross-correlation; weight (Cout, Cin, k, k); bias (Cout) or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride = 1,
              std::size_t padding = 0);

// 1x1x1 convolution over the channel axis of a scale stack.
// weight (Cout, Cin, 1, 1, 1); any other kernel extent is UnsupportedError.
Tensor conv3d_scale(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Per-channel normalisation of a scale stack; statistics pool over
// (batch, scale, H, W). gamma/beta have length C.
Tensor batchnorm_scale(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                       RunningStats& stats, bool training);

// Per-channel normalisation of an (N, C, H, W) map over (batch, H, W).
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                   RunningStats& stats, bool training);

// Max over the three scale slices: (N, 3, C, H, W) -> (N, C, H, W).
Tensor maxpool3d_scale(const Tensor& x);

Tensor upsample_nearest(const Tensor& x, std::size_t factor);
Tensor leaky_relu(const Tensor& x, double slope = kLeakySlope);
Tensor sigmoid(const Tensor& x);
// (N, C, H, W) -> (N, C)
Tensor global_avg_pool(const Tensor& x);
Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t padding = 0);
// (N, Cin) x (Cout, Cin) + (Cout) -> (N, Cout)
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);
// Three (N, C, H, W) maps -> (N, 3, C, H, W), in argument order.
Tensor stack_scales(const Tensor& s0, const Tensor& s1, const Tensor& s2);

// (N, C, H, W) -> (N, 1, H, W)
Tensor channel_mean(const Tensor& x);
Tensor channel_max(const Tensor& x);
// x (N, C, H, W) times gate (N, C), broadcast over space.
Tensor gate_channels(const Tensor& x, const Tensor& gate);
// x (N, C, H, W) times gate (N, 1, H, W), broadcast over channels.
Tensor gate_spatial(const Tensor& x, const Tensor& gate);

}  // namespace sodyolo::nn
