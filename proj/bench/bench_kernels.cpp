// Parallel kernels against their serial loop-nest references.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "sodyolo/kernels.hpp"
#include "sodyolo/reference.hpp"
#include "sodyolo/rng.hpp"

using namespace sodyolo;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

kernels::Conv2dGeometry conv_geometry(const benchmark::State& state) {
  kernels::Conv2dGeometry g;
  g.batch = 8;
  g.in_channels = static_cast<std::size_t>(state.range(0));
  g.out_channels = static_cast<std::size_t>(state.range(0));
  g.in_h = g.in_w = static_cast<std::size_t>(state.range(1));
  g.kernel = static_cast<std::size_t>(state.range(2));
  g.pad = g.kernel / 2;
  return g;
}

void set_conv_counters(benchmark::State& state, const kernels::Conv2dGeometry& g) {
  const double macs = static_cast<double>(g.batch * g.out_channels * g.out_h() * g.out_w() * g.patch());
  state.counters["MAC/s"] = benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate);
  state.counters["threads"] = omp_get_max_threads();
}

void conv_forward_parallel(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vec(g.batch * g.in_channels * g.in_h * g.in_w, 1);
  const auto w = random_vec(g.out_channels * g.patch(), 2);
  const auto b = random_vec(g.out_channels, 3);
  std::vector<double> out(g.batch * g.out_channels * g.out_h() * g.out_w());
  for (auto _ : state) {
    kernels::conv2d_forward(g, x, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  set_conv_counters(state, g);
}

void conv_forward_serial(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vec(g.batch * g.in_channels * g.in_h * g.in_w, 1);
  const auto w = random_vec(g.out_channels * g.patch(), 2);
  const auto b = random_vec(g.out_channels, 3);
  std::vector<double> out(g.batch * g.out_channels * g.out_h() * g.out_w());
  for (auto _ : state) {
    reference::conv2d_forward(g, x, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  set_conv_counters(state, g);
}

void conv_backward_parallel(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vec(g.batch * g.in_channels * g.in_h * g.in_w, 1);
  const auto w = random_vec(g.out_channels * g.patch(), 2);
  const auto gout = random_vec(g.batch * g.out_channels * g.out_h() * g.out_w(), 4);
  std::vector<double> dx(x.size()), dw(w.size()), db(g.out_channels);
  for (auto _ : state) {
    kernels::conv2d_backward(g, x, w, gout, dx, dw, db);
    benchmark::DoNotOptimize(dx.data());
  }
  set_conv_counters(state, g);
}

void conv_backward_serial(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vec(g.batch * g.in_channels * g.in_h * g.in_w, 1);
  const auto w = random_vec(g.out_channels * g.patch(), 2);
  const auto gout = random_vec(g.batch * g.out_channels * g.out_h() * g.out_w(), 4);
  std::vector<double> dx(x.size()), dw(w.size()), db(g.out_channels);
  for (auto _ : state) {
    reference::conv2d_backward(g, x, w, gout, dx, dw, db);
    benchmark::DoNotOptimize(dx.data());
  }
  set_conv_counters(state, g);
}

kernels::Pool2dGeometry pool_geometry(const benchmark::State& state) {
  kernels::Pool2dGeometry g;
  g.planes = 8 * 64;
  g.in_h = g.in_w = static_cast<std::size_t>(state.range(0));
  g.kernel = 5;
  g.pad = 2;
  return g;
}

void maxpool_parallel(benchmark::State& state) {
  const auto g = pool_geometry(state);
  const auto x = random_vec(g.planes * g.in_h * g.in_w, 5);
  std::vector<double> out(g.planes * g.out_h() * g.out_w());
  std::vector<std::uint32_t> arg(out.size());
  for (auto _ : state) {
    kernels::maxpool2d_forward(g, x, out, arg);
    benchmark::DoNotOptimize(out.data());
  }
}

void maxpool_serial(benchmark::State& state) {
  const auto g = pool_geometry(state);
  const auto x = random_vec(g.planes * g.in_h * g.in_w, 5);
  std::vector<double> out(g.planes * g.out_h() * g.out_w());
  for (auto _ : state) {
    reference::maxpool2d_forward(g, x, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void upsample_parallel(benchmark::State& state) {
  const std::size_t planes = 8 * 64, h = static_cast<std::size_t>(state.range(0));
  const auto x = random_vec(planes * h * h, 6);
  std::vector<double> out(planes * h * h * 4);
  for (auto _ : state) {
    kernels::upsample_nearest_forward(planes, h, h, 2, x, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void upsample_serial(benchmark::State& state) {
  const std::size_t planes = 8 * 64, h = static_cast<std::size_t>(state.range(0));
  const auto x = random_vec(planes * h * h, 6);
  std::vector<double> out(planes * h * h * 4);
  for (auto _ : state) {
    reference::upsample_nearest_forward(planes, h, h, 2, x, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

// {channels, spatial, kernel}
#define CONV_ARGS Args({16, 32, 3})->Args({32, 16, 3})->Args({64, 16, 1})->Unit(benchmark::kMillisecond)

BENCHMARK(conv_forward_parallel)->CONV_ARGS;
BENCHMARK(conv_forward_serial)->CONV_ARGS;
BENCHMARK(conv_backward_parallel)->CONV_ARGS;
BENCHMARK(conv_backward_serial)->CONV_ARGS;
BENCHMARK(maxpool_parallel)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(maxpool_serial)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(upsample_parallel)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(upsample_serial)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
