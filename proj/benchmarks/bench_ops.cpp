#include <benchmark/benchmark.h>

#include "motionseg/encoder.hpp"
#include "motionseg/grad_check.hpp"
#include "motionseg/ops.hpp"
#include "motionseg/rng.hpp"

using namespace motionseg;

static void BM_Conv2d3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  Rng rng(1, 50);
  Tensor x = uniform_tensor(rng, {1, c, hw, hw}, -1, 1);
  Tensor k = uniform_tensor(rng, {c, c, 3, 3}, -1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, k, Conv2dSpec{1, 1, 1}).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(c) * c * 9 * hw * hw);
}
BENCHMARK(BM_Conv2d3x3)->Args({8, 32})->Args({16, 16})->Args({32, 8});

static void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(2, 50);
  Tensor a = uniform_tensor(rng, {n, n}, -1, 1);
  Tensor b = uniform_tensor(rng, {n, n}, -1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n) * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(1024);

static void BM_SoftmaxRows(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3, 50);
  Tensor s = uniform_tensor(rng, {n, n}, -2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax_over(s, {1}).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n) * n);
}
BENCHMARK(BM_SoftmaxRows)->Arg(256)->Arg(1024);

static void BM_AttentionTransition(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  Rng rng(4, 50);
  Tensor ua = uniform_tensor(rng, {c, hw, hw}, -1, 1);
  Tensor um = uniform_tensor(rng, {c, hw, hw}, -1, 1);
  Tensor p = uniform_tensor(rng, {c, c / 2}, -1, 1);
  Tensor q = uniform_tensor(rng, {c, c / 2}, -1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(attention_transition(ua, um, p, q).data());
  }
}
BENCHMARK(BM_AttentionTransition)->Args({8, 16})->Args({16, 16})->Args({8, 32});

static void BM_UpsampleBilinear(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  Rng rng(5, 50);
  Tensor x = uniform_tensor(rng, {1, 8, hw, hw}, -1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(upsample_bilinear(x, 2).data());
  }
}
BENCHMARK(BM_UpsampleBilinear)->Arg(16)->Arg(32);

BENCHMARK_MAIN();
