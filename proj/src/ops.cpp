#include "sodyolo/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "sodyolo/errors.hpp"
#include "sodyolo/kernels.hpp"

namespace sodyolo::nn {

namespace {

using Index = std::ptrdiff_t;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (!t.defined() || t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": " + what + " must be rank " +
                                std::to_string(rank) + ", got " +
                                (t.defined() ? shape_str(t.shape()) : std::string("undefined")));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

std::vector<double> copy_of(const Tensor& t) {
  auto d = t.data();
  return {d.begin(), d.end()};
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(x, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  if (weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3)) {
    throw std::invalid_argument("conv2d: weight " + shape_str(weight.shape()) +
                                " incompatible with input " + shape_str(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
    throw std::invalid_argument("conv2d: bias " + shape_str(bias.shape()) +
                                " incompatible with weight " + shape_str(weight.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  kernels::Conv2dGeometry g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.in_h = x.dim(2);
  g.in_w = x.dim(3);
  g.out_channels = weight.dim(0);
  g.kernel = weight.dim(2);
  g.stride = stride;
  g.pad = padding;
  if (g.in_h + 2 * padding < g.kernel || g.in_w + 2 * padding < g.kernel) {
    throw std::invalid_argument("conv2d: kernel " + shape_str(weight.shape()) +
                                " larger than padded input " + shape_str(x.shape()));
  }
  Shape out_shape{g.batch, g.out_channels, g.out_h(), g.out_w()};
  std::vector<double> out(shape_numel(out_shape));
  std::span<const double> b;
  if (bias.defined()) b = bias.data();
  kernels::conv2d_forward(g, x.data(), weight.data(), b, out);

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(out_shape), std::move(out), inputs, [g](detail::Node& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    std::span<double> dx, dw, db;
    if (xn.requires_grad) dx = xn.grad_buffer();
    if (wn.requires_grad) dw = wn.grad_buffer();
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) db = self.inputs[2]->grad_buffer();
    kernels::conv2d_backward(g, xn.data, wn.data, self.grad, dx, dw, db);
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                shape_str(shape));
  }
  return make_result(std::move(shape), copy_of(x), {x},
                     [](detail::Node& self) { self.inputs[0]->accumulate(self.grad); });
}

Tensor conv3d_scale(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 5, "conv3d_scale", "input");
  if (weight.rank() != 5) {
    throw std::invalid_argument("conv3d_scale: weight must be rank 5, got " +
                                shape_str(weight.shape()));
  }
  if (weight.dim(2) != 1 || weight.dim(3) != 1 || weight.dim(4) != 1) {
    throw UnsupportedError("conv3d_scale: only a (1,1,1) kernel is supported, got weight " +
                           shape_str(weight.shape()));
  }
  if (weight.dim(1) != x.dim(2)) {
    throw std::invalid_argument("conv3d_scale: weight " + shape_str(weight.shape()) +
                                " incompatible with input " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), s = x.dim(1), h = x.dim(3), w = x.dim(4);
  Tensor flat = reshape(x, {n * s, x.dim(2), h, w});
  Tensor w2 = reshape(weight, {weight.dim(0), weight.dim(1), 1, 1});
  Tensor y = conv2d(flat, w2, bias, 1, 0);
  return reshape(y, {n, s, weight.dim(0), h, w});
}

Tensor batchnorm_scale(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                       RunningStats& stats, bool training) {
  require_rank(x, 5, "batchnorm_scale", "input");
  if (!(eps > 0.0)) throw std::invalid_argument("batchnorm_scale: eps must be > 0");
  const std::size_t n = x.dim(0), s = x.dim(1), c = x.dim(2), hw = x.dim(3) * x.dim(4);
  if (gamma.numel() != c || beta.numel() != c) {
    throw std::invalid_argument("batchnorm_scale: gamma/beta length must equal channels " +
                                std::to_string(c));
  }
  if (stats.mean.size() != c || stats.var.size() != c) {
    stats.mean.assign(c, 0.0);
    stats.var.assign(c, 1.0);
  }
  const std::size_t m = n * s * hw;
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  std::vector<double> mean(c), invstd(c);
  if (training) {
#pragma omp parallel for schedule(static)
    for (Index ch = 0; ch < static_cast<Index>(c); ++ch) {
      double acc = 0.0;
      for (std::size_t b = 0; b < n * s; ++b) {
        const double* p = xd.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) acc += p[i];
      }
      const double mu = acc / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t b = 0; b < n * s; ++b) {
        const double* p = xd.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      const double var = sq / static_cast<double>(m);
      mean[ch] = mu;
      invstd[ch] = 1.0 / std::sqrt(var + eps);
      const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
      stats.mean[ch] = (1.0 - stats.momentum) * stats.mean[ch] + stats.momentum * mu;
      stats.var[ch] = (1.0 - stats.momentum) * stats.var[ch] + stats.momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = stats.mean[ch];
      invstd[ch] = 1.0 / std::sqrt(stats.var[ch] + eps);
    }
  }
  std::vector<double> xhat(x.numel()), out(x.numel());
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(n * s); ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const double xh = (xd[off + i] - mean[ch]) * invstd[ch];
        xhat[off + i] = xh;
        out[off + i] = gd[ch] * xh + bd[ch];
      }
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), invstd = std::move(invstd), n, s, c, hw, m,
       training](detail::Node& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const auto& gy = self.grad;
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double a = 0.0, b2 = 0.0;
          for (std::size_t b = 0; b < n * s; ++b) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              a += gy[off + i];
              b2 += gy[off + i] * xhat[off + i];
            }
          }
          sum_dy[ch] = a;
          sum_dy_xhat[ch] = b2;
        }
        if (gn.requires_grad) {
          auto g = gn.grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy_xhat[ch];
        }
        if (bn.requires_grad) {
          auto g = bn.grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy[ch];
        }
        if (xn.requires_grad) {
          auto gx = xn.grad_buffer();
          const auto& gamma_d = gn.data;
          const double inv_m = 1.0 / static_cast<double>(m);
          for (std::size_t b = 0; b < n * s; ++b) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              const std::size_t off = (b * c + ch) * hw;
              const double k = gamma_d[ch] * invstd[ch];
              for (std::size_t i = 0; i < hw; ++i) {
                if (training) {
                  gx[off + i] += k * (gy[off + i] - inv_m * sum_dy[ch] -
                                      xhat[off + i] * inv_m * sum_dy_xhat[ch]);
                } else {
                  gx[off + i] += k * gy[off + i];
                }
              }
            }
          }
        }
      });
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                   RunningStats& stats, bool training) {
  require_rank(x, 4, "batchnorm2d", "input");
  const Shape shape = x.shape();
  Tensor y = batchnorm_scale(reshape(x, {shape[0], 1, shape[1], shape[2], shape[3]}), gamma, beta,
                             eps, stats, training);
  return reshape(y, shape);
}

Tensor maxpool3d_scale(const Tensor& x) {
  require_rank(x, 5, "maxpool3d_scale", "input");
  if (x.dim(1) != kNumScales) {
    throw std::invalid_argument("maxpool3d_scale: scale dimension must be 3, got " +
                                shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), chw = x.dim(2) * x.dim(3) * x.dim(4);
  const auto xd = x.data();
  std::vector<double> out(n * chw);
  std::vector<std::uint8_t> which(n * chw);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(n); ++b) {
    for (std::size_t i = 0; i < chw; ++i) {
      std::uint8_t best = 0;
      double v = xd[(b * kNumScales) * chw + i];
      for (std::uint8_t sidx = 1; sidx < kNumScales; ++sidx) {
        const double cand = xd[(b * kNumScales + sidx) * chw + i];
        if (cand > v) {
          v = cand;
          best = sidx;
        }
      }
      out[b * chw + i] = v;
      which[b * chw + i] = best;
    }
  }
  return make_result({n, x.dim(2), x.dim(3), x.dim(4)}, std::move(out), {x},
                     [which = std::move(which), n, chw](detail::Node& self) {
                       auto gx = self.inputs[0]->grad_buffer();
                       for (std::size_t b = 0; b < n; ++b)
                         for (std::size_t i = 0; i < chw; ++i)
                           gx[(b * kNumScales + which[b * chw + i]) * chw + i] +=
                               self.grad[b * chw + i];
                     });
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  require_rank(x, 4, "upsample_nearest", "input");
  if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Shape out_shape{x.dim(0), x.dim(1), h * factor, w * factor};
  std::vector<double> out(shape_numel(out_shape));
  kernels::upsample_nearest_forward(planes, h, w, factor, x.data(), out);
  return make_result(std::move(out_shape), std::move(out), {x},
                     [planes, h, w, factor](detail::Node& self) {
                       kernels::upsample_nearest_backward(planes, h, w, factor, self.grad,
                                                          self.inputs[0]->grad_buffer());
                     });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(xd.size()); ++i) {
    out[i] = xd[i] >= 0.0 ? xd[i] : slope * xd[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [slope](detail::Node& self) {
    auto& in = *self.inputs[0];
    auto gx = in.grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += in.data[i] >= 0.0 ? self.grad[i] : slope * self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xd[i]));
  return make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double y = self.data[i];
      gx[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool", "input");
  const std::size_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  const auto xd = x.data();
  std::vector<double> out(nc);
  for (std::size_t p = 0; p < nc; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc += xd[p * hw + i];
    out[p] = acc / static_cast<double>(hw);
  }
  return make_result({x.dim(0), x.dim(1)}, std::move(out), {x}, [nc, hw](detail::Node& self) {
    auto gx = self.inputs[0]->grad_buffer();
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t p = 0; p < nc; ++p)
      for (std::size_t i = 0; i < hw; ++i) gx[p * hw + i] += self.grad[p] * inv;
  });
}

Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  require_rank(x, 4, "maxpool2d", "input");
  if (kernel < 1 || stride < 1 || 2 * padding > kernel) {
    throw std::invalid_argument("maxpool2d: invalid kernel/stride/padding");
  }
  kernels::Pool2dGeometry g;
  g.planes = x.dim(0) * x.dim(1);
  g.in_h = x.dim(2);
  g.in_w = x.dim(3);
  g.kernel = kernel;
  g.stride = stride;
  g.pad = padding;
  if (g.in_h + 2 * padding < kernel || g.in_w + 2 * padding < kernel) {
    throw std::invalid_argument("maxpool2d: kernel larger than padded input " +
                                shape_str(x.shape()));
  }
  Shape out_shape{x.dim(0), x.dim(1), g.out_h(), g.out_w()};
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::uint32_t> argmax(out.size());
  kernels::maxpool2d_forward(g, x.data(), out, argmax);
  return make_result(std::move(out_shape), std::move(out), {x},
                     [g, argmax = std::move(argmax)](detail::Node& self) {
                       kernels::maxpool2d_backward(g, self.grad, argmax,
                                                   self.inputs[0]->grad_buffer());
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  const std::size_t n = x.dim(0), cin = x.dim(1), cout = weight.dim(0);
  if (weight.dim(1) != cin || (bias.defined() && bias.numel() != cout)) {
    throw std::invalid_argument("linear: weight " + shape_str(weight.shape()) +
                                " incompatible with input " + shape_str(x.shape()));
  }
  const auto xd = x.data();
  const auto wd = weight.data();
  std::vector<double> out(n * cout);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = bias.defined() ? bias.data()[o] : 0.0;
      for (std::size_t i = 0; i < cin; ++i) acc += wd[o * cin + i] * xd[b * cin + i];
      out[b * cout + o] = acc;
    }
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result({n, cout}, std::move(out), inputs, [n, cin, cout](detail::Node& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    const auto& gy = self.grad;
    if (xn.requires_grad) {
      auto gx = xn.grad_buffer();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < cout; ++o)
          for (std::size_t i = 0; i < cin; ++i) gx[b * cin + i] += gy[b * cout + o] * wn.data[o * cin + i];
    }
    if (wn.requires_grad) {
      auto gw = wn.grad_buffer();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < cout; ++o)
          for (std::size_t i = 0; i < cin; ++i) gw[o * cin + i] += gy[b * cout + o] * xn.data[b * cin + i];
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      auto gb = self.inputs[2]->grad_buffer();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < cout; ++o) gb[o] += gy[b * cout + o];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = ad[i] + bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& in : self.inputs)
      if (in->requires_grad) in->accumulate(self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = ad[i] * bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    if (an.requires_grad) {
      auto g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.data[i];
    }
    if (bn.requires_grad) {
      auto g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out = copy_of(x);
  for (auto& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), {x}, [factor](detail::Node& self) {
    auto g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_result(Shape{}, {acc}, {x}, [](detail::Node& self) {
    auto g = self.inputs[0]->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  for (const auto& p : parts) require_rank(p, 4, "concat_channels", "input");
  const std::size_t n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.dim(0) != n || p.dim(2) != h || p.dim(3) != w) {
      throw std::invalid_argument("concat_channels: shape mismatch " +
                                  shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  const std::size_t hw = h * w;
  std::vector<double> out(n * total * hw);
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t c0 = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto src = parts[k].data().subspan(b * widths[k] * hw, widths[k] * hw);
      std::copy(src.begin(), src.end(), out.begin() + static_cast<Index>((b * total + c0) * hw));
      c0 += widths[k];
    }
  }
  return make_result({n, total, h, w}, std::move(out), parts,
                     [widths, n, total, hw](detail::Node& self) {
                       std::size_t c0 = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (self.inputs[k]->requires_grad) {
                           auto g = self.inputs[k]->grad_buffer();
                           for (std::size_t b = 0; b < n; ++b)
                             for (std::size_t i = 0; i < widths[k] * hw; ++i)
                               g[b * widths[k] * hw + i] += self.grad[(b * total + c0) * hw + i];
                         }
                         c0 += widths[k];
                       }
                     });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank(x, 4, "slice_channels", "input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (count == 0 || begin + count > c) {
    throw std::invalid_argument("slice_channels: range [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
  }
  std::vector<double> out(n * count * hw);
  const auto xd = x.data();
  for (std::size_t b = 0; b < n; ++b)
    std::copy_n(xd.begin() + static_cast<Index>((b * c + begin) * hw), count * hw,
                out.begin() + static_cast<Index>(b * count * hw));
  return make_result({n, count, x.dim(2), x.dim(3)}, std::move(out), {x},
                     [n, c, hw, begin, count](detail::Node& self) {
                       auto g = self.inputs[0]->grad_buffer();
                       for (std::size_t b = 0; b < n; ++b)
                         for (std::size_t i = 0; i < count * hw; ++i)
                           g[(b * c + begin) * hw + i] += self.grad[b * count * hw + i];
                     });
}

Tensor stack_scales(const Tensor& s0, const Tensor& s1, const Tensor& s2) {
  require_rank(s0, 4, "stack_scales", "input");
  require_same_shape(s0, s1, "stack_scales");
  require_same_shape(s0, s2, "stack_scales");
  const std::size_t n = s0.dim(0), chw = s0.dim(1) * s0.dim(2) * s0.dim(3);
  std::vector<double> out(n * kNumScales * chw);
  const Tensor* parts[] = {&s0, &s1, &s2};
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t s = 0; s < kNumScales; ++s) {
      const auto src = parts[s]->data().subspan(b * chw, chw);
      std::copy(src.begin(), src.end(),
                out.begin() + static_cast<Index>((b * kNumScales + s) * chw));
    }
  return make_result({n, kNumScales, s0.dim(1), s0.dim(2), s0.dim(3)}, std::move(out),
                     {s0, s1, s2}, [n, chw](detail::Node& self) {
                       for (std::size_t s = 0; s < kNumScales; ++s) {
                         if (!self.inputs[s]->requires_grad) continue;
                         auto g = self.inputs[s]->grad_buffer();
                         for (std::size_t b = 0; b < n; ++b)
                           for (std::size_t i = 0; i < chw; ++i)
                             g[b * chw + i] += self.grad[(b * kNumScales + s) * chw + i];
                       }
                     });
}

Tensor channel_mean(const Tensor& x) {
  require_rank(x, 4, "channel_mean", "input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const auto xd = x.data();
  std::vector<double> out(n * hw, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < hw; ++i) out[b * hw + i] += xd[(b * c + ch) * hw + i];
    for (std::size_t i = 0; i < hw; ++i) out[b * hw + i] /= static_cast<double>(c);
  }
  return make_result({n, 1, x.dim(2), x.dim(3)}, std::move(out), {x},
                     [n, c, hw](detail::Node& self) {
                       auto g = self.inputs[0]->grad_buffer();
                       const double inv = 1.0 / static_cast<double>(c);
                       for (std::size_t b = 0; b < n; ++b)
                         for (std::size_t ch = 0; ch < c; ++ch)
                           for (std::size_t i = 0; i < hw; ++i)
                             g[(b * c + ch) * hw + i] += self.grad[b * hw + i] * inv;
                     });
}

Tensor channel_max(const Tensor& x) {
  require_rank(x, 4, "channel_max", "input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const auto xd = x.data();
  std::vector<double> out(n * hw);
  std::vector<std::uint32_t> which(n * hw);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < hw; ++i) {
      std::uint32_t best = 0;
      double v = xd[b * c * hw + i];
      for (std::uint32_t ch = 1; ch < c; ++ch) {
        const double cand = xd[(b * c + ch) * hw + i];
        if (cand > v) {
          v = cand;
          best = ch;
        }
      }
      out[b * hw + i] = v;
      which[b * hw + i] = best;
    }
  return make_result({n, 1, x.dim(2), x.dim(3)}, std::move(out), {x},
                     [n, c, hw, which = std::move(which)](detail::Node& self) {
                       auto g = self.inputs[0]->grad_buffer();
                       for (std::size_t b = 0; b < n; ++b)
                         for (std::size_t i = 0; i < hw; ++i)
                           g[(b * c + which[b * hw + i]) * hw + i] += self.grad[b * hw + i];
                     });
}

Tensor gate_channels(const Tensor& x, const Tensor& gate) {
  require_rank(x, 4, "gate_channels", "input");
  require_rank(gate, 2, "gate_channels", "gate");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gate.dim(0) != n || gate.dim(1) != c) {
    throw std::invalid_argument("gate_channels: gate " + shape_str(gate.shape()) +
                                " incompatible with input " + shape_str(x.shape()));
  }
  const auto xd = x.data();
  const auto gd = gate.data();
  std::vector<double> out(x.numel());
  for (std::size_t p = 0; p < n * c; ++p)
    for (std::size_t i = 0; i < hw; ++i) out[p * hw + i] = gd[p] * xd[p * hw + i];
  return make_result(x.shape(), std::move(out), {x, gate}, [n, c, hw](detail::Node& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    if (xn.requires_grad) {
      auto g = xn.grad_buffer();
      for (std::size_t p = 0; p < n * c; ++p)
        for (std::size_t i = 0; i < hw; ++i) g[p * hw + i] += self.grad[p * hw + i] * gn.data[p];
    }
    if (gn.requires_grad) {
      auto g = gn.grad_buffer();
      for (std::size_t p = 0; p < n * c; ++p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += self.grad[p * hw + i] * xn.data[p * hw + i];
        g[p] += acc;
      }
    }
  });
}

Tensor gate_spatial(const Tensor& x, const Tensor& gate) {
  require_rank(x, 4, "gate_spatial", "input");
  require_rank(gate, 4, "gate_spatial", "gate");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gate.dim(0) != n || gate.dim(1) != 1 || gate.dim(2) != x.dim(2) || gate.dim(3) != x.dim(3)) {
    throw std::invalid_argument("gate_spatial: gate " + shape_str(gate.shape()) +
                                " incompatible with input " + shape_str(x.shape()));
  }
  const auto xd = x.data();
  const auto gd = gate.data();
  std::vector<double> out(x.numel());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < hw; ++i)
        out[(b * c + ch) * hw + i] = gd[b * hw + i] * xd[(b * c + ch) * hw + i];
  return make_result(x.shape(), std::move(out), {x, gate}, [n, c, hw](detail::Node& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    if (xn.requires_grad) {
      auto g = xn.grad_buffer();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t i = 0; i < hw; ++i)
            g[(b * c + ch) * hw + i] += self.grad[(b * c + ch) * hw + i] * gn.data[b * hw + i];
    }
    if (gn.requires_grad) {
      auto g = gn.grad_buffer();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t i = 0; i < hw; ++i)
            g[b * hw + i] += self.grad[(b * c + ch) * hw + i] * xn.data[(b * c + ch) * hw + i];
    }
  });
}

}  // namespace sodyolo::nn
