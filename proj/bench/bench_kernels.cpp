// Parallel kernels against the serial reference loops.

#include <benchmark/benchmark.h>

#include <random>

#include "pyroclass/kernels.hpp"
#include "pyroclass/layers.hpp"
#include "pyroclass/reference.hpp"

using namespace pyroclass;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

void BM_GemmParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  auto c = Tensor::zeros({n, n});
  for (auto _ : state) {
    kernels::gemm(kernels::Trans::No, kernels::Trans::No, n, n, n, a.raw(), b.raw(), c.raw(), false);
    benchmark::DoNotOptimize(c.raw());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

void BM_GemmReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(reference::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

// One 3x3 layer at the given channel count and spatial size.
ConvParams<float> conv_params(std::size_t c) {
  return {random_tensor({c, c, 3, 3}, 3), random_tensor({c}, 4)};
}

void BM_ConvParallel(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0)), s = static_cast<std::size_t>(state.range(1));
  const auto p = conv_params(c);
  const auto x = random_tensor({1, c, s, s}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, p).output);
}

void BM_ConvReference(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0)), s = static_cast<std::size_t>(state.range(1));
  const auto p = conv_params(c);
  const auto x = random_tensor({c, s, s}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d(x, p.kernels, p.bias));
}

}  // namespace

BENCHMARK(BM_GemmParallel)->Arg(64)->Arg(256);
BENCHMARK(BM_GemmReference)->Arg(64)->Arg(256);
BENCHMARK(BM_ConvParallel)->Args({16, 32})->Args({64, 56});
BENCHMARK(BM_ConvReference)->Args({16, 32})->Args({64, 56});

BENCHMARK_MAIN();
