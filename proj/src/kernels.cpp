#include "sodyolo/kernels.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace sodyolo::kernels {

namespace {

using Index = std::ptrdiff_t;

// col[(ci*k + ky)*k + kx][oy*ow + ox]
void im2col(const Conv2dGeometry& g, const double* x, double* col) {
  const Index k = static_cast<Index>(g.kernel);
  const Index oh = static_cast<Index>(g.out_h());
  const Index ow = static_cast<Index>(g.out_w());
  const Index h = static_cast<Index>(g.in_h);
  const Index w = static_cast<Index>(g.in_w);
  const Index s = static_cast<Index>(g.stride);
  const Index p = static_cast<Index>(g.pad);
  const Index rows = static_cast<Index>(g.patch());
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    const Index ci = r / (k * k);
    const Index ky = (r / k) % k;
    const Index kx = r % k;
    const double* plane = x + ci * h * w;
    double* dst = col + r * oh * ow;
    for (Index oy = 0; oy < oh; ++oy) {
      const Index iy = oy * s - p + ky;
      double* drow = dst + oy * ow;
      if (iy < 0 || iy >= h) {
        std::fill(drow, drow + ow, 0.0);
        continue;
      }
      const double* srow = plane + iy * w;
      for (Index ox = 0; ox < ow; ++ox) {
        const Index ix = ox * s - p + kx;
        drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0;
      }
    }
  }
}

// dx += col2im(dcol); each input channel owns its k*k rows.
void col2im_add(const Conv2dGeometry& g, const double* dcol, double* dx) {
  const Index k = static_cast<Index>(g.kernel);
  const Index oh = static_cast<Index>(g.out_h());
  const Index ow = static_cast<Index>(g.out_w());
  const Index h = static_cast<Index>(g.in_h);
  const Index w = static_cast<Index>(g.in_w);
  const Index s = static_cast<Index>(g.stride);
  const Index p = static_cast<Index>(g.pad);
  const Index cin = static_cast<Index>(g.in_channels);
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < cin; ++ci) {
    double* plane = dx + ci * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const double* src = dcol + ((ci * k + ky) * k + kx) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) continue;
          double* drow = plane + iy * w;
          const double* srow = src + oy * ow;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * s - p + kx;
            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

// out[co][:] (+)= sum_k w[co][k] * col[k][:], four output rows per pass.
void gemm_rows(const double* w, const double* col, double* out, Index cout, Index kdim,
               Index pdim) {
  const Index blocks = (cout + 3) / 4;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index c0 = b * 4;
    const Index rows = std::min<Index>(4, cout - c0);
    if (rows == 4) {
      double* o0 = out + (c0 + 0) * pdim;
      double* o1 = out + (c0 + 1) * pdim;
      double* o2 = out + (c0 + 2) * pdim;
      double* o3 = out + (c0 + 3) * pdim;
      for (Index kk = 0; kk < kdim; ++kk) {
        const double w0 = w[(c0 + 0) * kdim + kk];
        const double w1 = w[(c0 + 1) * kdim + kk];
        const double w2 = w[(c0 + 2) * kdim + kk];
        const double w3 = w[(c0 + 3) * kdim + kk];
        const double* c = col + kk * pdim;
#pragma omp simd
        for (Index p = 0; p < pdim; ++p) {
          const double v = c[p];
          o0[p] += w0 * v;
          o1[p] += w1 * v;
          o2[p] += w2 * v;
          o3[p] += w3 * v;
        }
      }
    } else {
      for (Index r = 0; r < rows; ++r) {
        double* o = out + (c0 + r) * pdim;
        for (Index kk = 0; kk < kdim; ++kk) {
          const double wv = w[(c0 + r) * kdim + kk];
          const double* c = col + kk * pdim;
#pragma omp simd
          for (Index p = 0; p < pdim; ++p) o[p] += wv * c[p];
        }
      }
    }
  }
}

double dot(const double* a, const double* b, Index n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  Index i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> out) {
  const Index pdim = static_cast<Index>(g.out_h() * g.out_w());
  const Index kdim = static_cast<Index>(g.patch());
  const Index cout = static_cast<Index>(g.out_channels);
  const std::size_t in_plane = g.in_channels * g.in_h * g.in_w;
  std::vector<double> col;
  if (!g.pointwise()) col.resize(static_cast<std::size_t>(kdim * pdim));
  for (std::size_t n = 0; n < g.batch; ++n) {
    double* o = out.data() + n * static_cast<std::size_t>(cout * pdim);
    for (Index c = 0; c < cout; ++c) {
      std::fill(o + c * pdim, o + (c + 1) * pdim, bias.empty() ? 0.0 : bias[c]);
    }
    const double* xn = x.data() + n * in_plane;
    const double* src = xn;
    if (!g.pointwise()) {
      im2col(g, xn, col.data());
      src = col.data();
    }
    gemm_rows(w.data(), src, o, cout, kdim, pdim);
  }
}

void conv2d_backward(const Conv2dGeometry& g, std::span<const double> x,
                     std::span<const double> w, std::span<const double> gout,
                     std::span<double> dx, std::span<double> dw, std::span<double> dbias) {
  const Index pdim = static_cast<Index>(g.out_h() * g.out_w());
  const Index kdim = static_cast<Index>(g.patch());
  const Index cout = static_cast<Index>(g.out_channels);
  const std::size_t in_plane = g.in_channels * g.in_h * g.in_w;
  std::vector<double> col;
  std::vector<double> dcol;
  if (!g.pointwise()) {
    if (!dw.empty()) col.resize(static_cast<std::size_t>(kdim * pdim));
    if (!dx.empty()) dcol.resize(static_cast<std::size_t>(kdim * pdim));
  }
  for (std::size_t n = 0; n < g.batch; ++n) {
    const double* go = gout.data() + n * static_cast<std::size_t>(cout * pdim);
    const double* xn = x.data() + n * in_plane;
    if (!dbias.empty()) {
#pragma omp parallel for schedule(static)
      for (Index c = 0; c < cout; ++c) {
        double s = 0.0;
        for (Index p = 0; p < pdim; ++p) s += go[c * pdim + p];
        dbias[c] += s;
      }
    }
    if (!dw.empty()) {
      const double* src = xn;
      if (!g.pointwise()) {
        im2col(g, xn, col.data());
        src = col.data();
      }
#pragma omp parallel for schedule(static)
      for (Index c = 0; c < cout; ++c) {
        for (Index kk = 0; kk < kdim; ++kk) {
          dw[c * kdim + kk] += dot(go + c * pdim, src + kk * pdim, pdim);
        }
      }
    }
    if (!dx.empty()) {
      double* dxn = dx.data() + n * in_plane;
      double* dst = g.pointwise() ? dxn : dcol.data();
      if (!g.pointwise()) std::fill(dcol.begin(), dcol.end(), 0.0);
#pragma omp parallel for schedule(static)
      for (Index kk = 0; kk < kdim; ++kk) {
        double* d = dst + kk * pdim;
        for (Index c = 0; c < cout; ++c) {
          const double wv = w[c * kdim + kk];
          const double* gr = go + c * pdim;
#pragma omp simd
          for (Index p = 0; p < pdim; ++p) d[p] += wv * gr[p];
        }
      }
      if (!g.pointwise()) col2im_add(g, dcol.data(), dxn);
    }
  }
}

void maxpool2d_forward(const Pool2dGeometry& g, std::span<const double> x,
                       std::span<double> out, std::span<std::uint32_t> argmax) {
  const Index oh = static_cast<Index>(g.out_h());
  const Index ow = static_cast<Index>(g.out_w());
  const Index h = static_cast<Index>(g.in_h);
  const Index w = static_cast<Index>(g.in_w);
  const Index k = static_cast<Index>(g.kernel);
  const Index s = static_cast<Index>(g.stride);
  const Index p = static_cast<Index>(g.pad);
  const Index planes = static_cast<Index>(g.planes);
#pragma omp parallel for schedule(static)
  for (Index pl = 0; pl < planes; ++pl) {
    const double* src = x.data() + pl * h * w;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        Index best_idx = -1;
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) continue;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * s - p + kx;
            if (ix < 0 || ix >= w) continue;
            const double v = src[iy * w + ix];
            if (best_idx < 0 || v > best) {
              best = v;
              best_idx = iy * w + ix;
            }
          }
        }
        const Index o = (pl * oh + oy) * ow + ox;
        out[o] = best;
        argmax[o] = static_cast<std::uint32_t>(best_idx);
      }
    }
  }
}

void maxpool2d_backward(const Pool2dGeometry& g, std::span<const double> gout,
                        std::span<const std::uint32_t> argmax, std::span<double> dx) {
  const Index plane_out = static_cast<Index>(g.out_h() * g.out_w());
  const Index plane_in = static_cast<Index>(g.in_h * g.in_w);
  const Index planes = static_cast<Index>(g.planes);
#pragma omp parallel for schedule(static)
  for (Index pl = 0; pl < planes; ++pl) {
    double* d = dx.data() + pl * plane_in;
    for (Index o = 0; o < plane_out; ++o) {
      d[argmax[pl * plane_out + o]] += gout[pl * plane_out + o];
    }
  }
}

void upsample_nearest_forward(std::size_t planes, std::size_t h, std::size_t w,
                              std::size_t factor, std::span<const double> x,
                              std::span<double> out) {
  const Index oh = static_cast<Index>(h * factor);
  const Index ow = static_cast<Index>(w * factor);
  const Index f = static_cast<Index>(factor);
  const Index np = static_cast<Index>(planes);
  const Index iw = static_cast<Index>(w);
  const Index ih = static_cast<Index>(h);
#pragma omp parallel for schedule(static)
  for (Index pl = 0; pl < np; ++pl) {
    const double* src = x.data() + pl * ih * iw;
    double* dst = out.data() + pl * oh * ow;
    for (Index i = 0; i < oh; ++i) {
      const double* srow = src + (i / f) * iw;
      for (Index j = 0; j < ow; ++j) dst[i * ow + j] = srow[j / f];
    }
  }
}

void upsample_nearest_backward(std::size_t planes, std::size_t h, std::size_t w,
                               std::size_t factor, std::span<const double> gout,
                               std::span<double> dx) {
  const Index oh = static_cast<Index>(h * factor);
  const Index ow = static_cast<Index>(w * factor);
  const Index f = static_cast<Index>(factor);
  const Index np = static_cast<Index>(planes);
  const Index iw = static_cast<Index>(w);
  const Index ih = static_cast<Index>(h);
#pragma omp parallel for schedule(static)
  for (Index pl = 0; pl < np; ++pl) {
    const double* src = gout.data() + pl * oh * ow;
    double* dst = dx.data() + pl * ih * iw;
    for (Index i = 0; i < oh; ++i) {
      double* drow = dst + (i / f) * iw;
      for (Index j = 0; j < ow; ++j) drow[j / f] += src[i * ow + j];
    }
  }
}

}  // namespace sodyolo::kernels
