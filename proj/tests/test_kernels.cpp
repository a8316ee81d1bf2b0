#include <doctest.h>
#include <omp.h>

#include <vector>

#include "sodyolo/kernels.hpp"
#include "sodyolo/reference.hpp"
#include "sodyolo/rng.hpp"

using namespace sodyolo;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

kernels::Conv2dGeometry random_geometry(Rng& rng) {
  kernels::Conv2dGeometry g;
  g.batch = static_cast<std::size_t>(rng.uniform_int(1, 3));
  g.in_channels = static_cast<std::size_t>(rng.uniform_int(1, 5));
  g.out_channels = static_cast<std::size_t>(rng.uniform_int(1, 5));
  g.kernel = static_cast<std::size_t>(rng.uniform_int(0, 2) * 2 + 1);
  g.stride = static_cast<std::size_t>(rng.uniform_int(1, 2));
  g.pad = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(g.kernel / 2)));
  g.in_h = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(g.kernel), 9));
  g.in_w = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(g.kernel), 9));
  return g;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol));
}

}  // namespace

TEST_CASE("conv2d forward and backward match the serial loops") {
  Rng rng(1);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = random_geometry(rng);
    const std::size_t nx = g.batch * g.in_channels * g.in_h * g.in_w;
    const std::size_t nw = g.out_channels * g.patch();
    const std::size_t no = g.batch * g.out_channels * g.out_h() * g.out_w();
    const auto x = random_vec(rng, nx), w = random_vec(rng, nw), b = random_vec(rng, g.out_channels);
    const auto gout = random_vec(rng, no);

    std::vector<double> out(no), ref(no);
    kernels::conv2d_forward(g, x, w, b, out);
    reference::conv2d_forward(g, x, w, b, ref);
    check_close(out, ref);

    std::vector<double> dx(nx), dw(nw), db(g.out_channels);
    std::vector<double> rdx(nx), rdw(nw), rdb(g.out_channels);
    kernels::conv2d_backward(g, x, w, gout, dx, dw, db);
    reference::conv2d_backward(g, x, w, gout, rdx, rdw, rdb);
    check_close(dx, rdx);
    check_close(dw, rdw);
    check_close(db, rdb);
  }
}

TEST_CASE("conv2d without bias and with empty gradient targets") {
  Rng rng(2);
  kernels::Conv2dGeometry g;
  g.in_channels = 2;
  g.out_channels = 3;
  g.in_h = g.in_w = 4;
  g.kernel = 1;
  const auto x = random_vec(rng, 32), w = random_vec(rng, 6);
  std::vector<double> out(48), ref(48);
  kernels::conv2d_forward(g, x, w, {}, out);
  reference::conv2d_forward(g, x, w, {}, ref);
  check_close(out, ref);
  std::vector<double> dw(6), rdw(6);
  const auto gout = random_vec(rng, 48);
  kernels::conv2d_backward(g, x, w, gout, {}, dw, {});
  reference::conv2d_backward(g, x, w, gout, {}, rdw, {});
  check_close(dw, rdw);
}

TEST_CASE("maxpool2d matches the serial loop and routes gradients to the winner") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    kernels::Pool2dGeometry g;
    g.planes = static_cast<std::size_t>(rng.uniform_int(1, 4));
    g.kernel = static_cast<std::size_t>(rng.uniform_int(1, 5));
    g.stride = static_cast<std::size_t>(rng.uniform_int(1, 2));
    g.pad = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(g.kernel / 2)));
    g.in_h = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(g.kernel), 8));
    g.in_w = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(g.kernel), 8));
    const std::size_t nin = g.planes * g.in_h * g.in_w, nout = g.planes * g.out_h() * g.out_w();
    const auto x = random_vec(rng, nin);
    std::vector<double> out(nout), ref(nout);
    std::vector<std::uint32_t> arg(nout);
    kernels::maxpool2d_forward(g, x, out, arg);
    reference::maxpool2d_forward(g, x, ref);
    CHECK(out == ref);

    const auto gout = random_vec(rng, nout);
    std::vector<double> dx(nin), want(nin, 0.0);
    kernels::maxpool2d_backward(g, gout, arg, dx);
    const std::size_t plane_out = g.out_h() * g.out_w();
    for (std::size_t i = 0; i < nout; ++i) {
      const std::size_t plane = i / plane_out;
      CHECK(x[plane * g.in_h * g.in_w + arg[i]] == out[i]);
      want[plane * g.in_h * g.in_w + arg[i]] += gout[i];
    }
    check_close(dx, want);
  }
}

TEST_CASE("maxpool2d ties pick the first window position") {
  kernels::Pool2dGeometry g;
  g.in_h = g.in_w = 2;
  g.kernel = 2;
  g.stride = 2;
  const std::vector<double> x{5, 5, 5, 5};
  std::vector<double> out(1);
  std::vector<std::uint32_t> arg(1);
  kernels::maxpool2d_forward(g, x, out, arg);
  CHECK(out[0] == 5.0);
  CHECK(arg[0] == 0);
}

TEST_CASE("upsample forward matches the index formula and backward sums blocks") {
  Rng rng(4);
  for (std::size_t factor : {1, 2, 3, 4}) {
    const std::size_t planes = 3, h = 3, w = 5;
    const auto x = random_vec(rng, planes * h * w);
    std::vector<double> out(planes * h * w * factor * factor), ref(out.size());
    kernels::upsample_nearest_forward(planes, h, w, factor, x, out);
    reference::upsample_nearest_forward(planes, h, w, factor, x, ref);
    CHECK(out == ref);

    const auto gout = random_vec(rng, out.size());
    std::vector<double> dx(x.size()), want(x.size(), 0.0);
    kernels::upsample_nearest_backward(planes, h, w, factor, gout, dx);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < h * factor; ++i)
        for (std::size_t j = 0; j < w * factor; ++j)
          want[(p * h + i / factor) * w + j / factor] += gout[(p * h * factor + i) * w * factor + j];
    check_close(dx, want);
  }
}

TEST_CASE("kernel results do not depend on the thread count") {
  Rng rng(5);
  kernels::Conv2dGeometry g;
  g.batch = 2;
  g.in_channels = 6;
  g.out_channels = 7;
  g.in_h = g.in_w = 11;
  g.kernel = 3;
  g.pad = 1;
  const auto x = random_vec(rng, g.batch * g.in_channels * g.in_h * g.in_w);
  const auto w = random_vec(rng, g.out_channels * g.patch());
  const auto b = random_vec(rng, g.out_channels);
  const std::size_t no = g.batch * g.out_channels * g.out_h() * g.out_w();
  const auto gout = random_vec(rng, no);

  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<double> out(no), dx(x.size()), dw(w.size()), db(b.size());
    kernels::conv2d_forward(g, x, w, b, out);
    kernels::conv2d_backward(g, x, w, gout, dx, dw, db);
    out.insert(out.end(), dx.begin(), dx.end());
    out.insert(out.end(), dw.begin(), dw.end());
    out.insert(out.end(), db.begin(), db.end());
    return out;
  };
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(omp_get_num_procs());
  CHECK(one == four);
}
