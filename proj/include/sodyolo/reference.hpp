#pragma once

// Serial loop-nest versions of the kernels in kernels.hpp. Kept for tests and
// the kernel benchmark; nothing in the library calls them.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

#include "sodyolo/kernels.hpp"

namespace sodyolo::reference {

inline void conv2d_forward(const kernels::Conv2dGeometry& g, std::span<const double> x,
                           std::span<const double> w, std::span<const double> bias,
                           std::span<double> out) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                static_cast<std::ptrdiff_t>(g.pad);
                const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h) ||
                    ix >= static_cast<std::ptrdiff_t>(g.in_w))
                  continue;
                acc += w[((co * g.in_channels + ci) * k + ky) * k + kx] *
                       x[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
              }
          out[((n * g.out_channels + co) * oh + oy) * ow + ox] = acc;
        }
}

inline void conv2d_backward(const kernels::Conv2dGeometry& g, std::span<const double> x,
                            std::span<const double> w, std::span<const double> gout,
                            std::span<double> dx, std::span<double> dw,
                            std::span<double> dbias) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double go = gout[((n * g.out_channels + co) * oh + oy) * ow + ox];
          if (!dbias.empty()) dbias[co] += go;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                static_cast<std::ptrdiff_t>(g.pad);
                const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h) ||
                    ix >= static_cast<std::ptrdiff_t>(g.in_w))
                  continue;
                const std::size_t xi = ((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix;
                const std::size_t wi = ((co * g.in_channels + ci) * k + ky) * k + kx;
                if (!dw.empty()) dw[wi] += go * x[xi];
                if (!dx.empty()) dx[xi] += go * w[wi];
              }
        }
}

inline void maxpool2d_forward(const kernels::Pool2dGeometry& g, std::span<const double> x,
                              std::span<double> out) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t pl = 0; pl < g.planes; ++pl)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t ky = 0; ky < g.kernel; ++ky)
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                            static_cast<std::ptrdiff_t>(g.pad);
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h) ||
                ix >= static_cast<std::ptrdiff_t>(g.in_w))
              continue;
            const double v = x[(pl * g.in_h + iy) * g.in_w + ix];
            if (v > best) best = v;
          }
        out[(pl * oh + oy) * ow + ox] = best;
      }
}

inline void upsample_nearest_forward(std::size_t planes, std::size_t h, std::size_t w,
                                     std::size_t factor, std::span<const double> x,
                                     std::span<double> out) {
  for (std::size_t pl = 0; pl < planes; ++pl)
    for (std::size_t i = 0; i < h * factor; ++i)
      for (std::size_t j = 0; j < w * factor; ++j)
        out[(pl * h * factor + i) * w * factor + j] =
            x[(pl * h + i / factor) * w + j / factor];
}

}  // namespace sodyolo::reference
