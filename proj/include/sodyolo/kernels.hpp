#pragma once

// Raw-buffer compute kernels behind the differentiable ops. Every kernel
// assigns each output element to exactly one thread and reduces in a fixed
// order, so results are bitwise identical for any OpenMP thread count.
// Serial loop-nest counterparts live in reference.hpp.

#include <cstddef>
#include <cstdint>
#include <span>

namespace sodyolo::kernels {

struct Conv2dGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  std::size_t patch() const { return in_channels * kernel * kernel; }
  bool pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

// out = conv(x, w) + bias. bias may be empty.
void conv2d_forward(const Conv2dGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> out);

// Accumulates gradients into whichever of dx / dw / dbias are non-empty.
void conv2d_backward(const Conv2dGeometry& g, std::span<const double> x,
                     std::span<const double> w, std::span<const double> gout,
                     std::span<double> dx, std::span<double> dw, std::span<double> dbias);

struct Pool2dGeometry {
  std::size_t planes = 1;  // batch * channels
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

// Padding never wins the max. argmax receives the in-plane flat index of the
// winner (first in row-major window order on ties).
void maxpool2d_forward(const Pool2dGeometry& g, std::span<const double> x,
                       std::span<double> out, std::span<std::uint32_t> argmax);
void maxpool2d_backward(const Pool2dGeometry& g, std::span<const double> gout,
                        std::span<const std::uint32_t> argmax, std::span<double> dx);

void upsample_nearest_forward(std::size_t planes, std::size_t h, std::size_t w,
                              std::size_t factor, std::span<const double> x,
                              std::span<double> out);
void upsample_nearest_backward(std::size_t planes, std::size_t h, std::size_t w,
                               std::size_t factor, std::span<const double> gout,
                               std::span<double> dx);

}  // namespace sodyolo::kernels
