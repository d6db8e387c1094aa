// Hot-path microbenchmarks: the packed GEMM behind einsum contraction,
// im2col convolution, one full feature block, the histogram loss, the
// resampler, and an end-to-end forward pass at a small input.
#include <benchmark/benchmark.h>

#include <vector>

#include "latis/contract.hpp"
#include "latis/conv.hpp"
#include "latis/image.hpp"
#include "latis/losses.hpp"
#include "latis/model.hpp"

using namespace latis;

namespace {

Tensor<float> random_tensor(std::vector<int> shape, uint64_t seed) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<float> v(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    v[size_t(i)] = float(rng_unit(rng_mix(seed, 0, uint64_t(i))) * 2 - 1);
  return Tensor<float>::from(std::move(shape), std::move(v));
}

void bm_contract_matmul(benchmark::State& state) {
  const int n = int(state.range(0));
  const Tensor<float> a = random_tensor({n, n}, 1);
  const Tensor<float> b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(contract(a, b, "ij,jk->ik"));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(n) * n * n);
}
BENCHMARK(bm_contract_matmul)->Arg(64)->Arg(128)->Arg(256);

void bm_conv2d(benchmark::State& state) {
  const int c = int(state.range(0));
  const Tensor<float> x = random_tensor({1, c, 64, 64}, 3);
  const Tensor<float> w = random_tensor({c, c, 3, 3}, 4);
  const Tensor<float> b = random_tensor({c}, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, w, b));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(c) * c * 9 * 64 * 64);
}
BENCHMARK(bm_conv2d)->Arg(8)->Arg(32);

void bm_attention_contract(benchmark::State& state) {
  // The content-lambda application shape: queries against a global matrix.
  const int p = int(state.range(0));
  const Tensor<float> q = random_tensor({1, 4, p, 16}, 6);
  const Tensor<float> lam = random_tensor({1, 4, 16, 8}, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(contract(q, lam, "nhpk,nhkv->nhpv"));
  }
  state.SetItemsProcessed(state.iterations() * 4 * int64_t(p) * 16 * 8);
}
BENCHMARK(bm_attention_contract)->Arg(1024)->Arg(4096);

void bm_histogram_loss(benchmark::State& state) {
  const int edge = int(state.range(0));
  const Tensor<float> a = random_tensor({1, 1, edge, edge}, 8);
  const Tensor<float> b = random_tensor({1, 1, edge, edge}, 9);
  const HistogramConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(patchwise_emd_loss(a, b, cfg));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(edge) * edge);
}
BENCHMARK(bm_histogram_loss)->Arg(64)->Arg(128);

void bm_bicubic_resize(benchmark::State& state) {
  const int edge = int(state.range(0));
  ImageF src(edge, edge);
  for (int64_t i = 0; i < src.numel(); ++i)
    src.pixels[size_t(i)] = float(rng_unit(rng_mix(10, 0, uint64_t(i))));
  for (auto _ : state) {
    benchmark::DoNotOptimize(bicubic_resize(src, edge * 2, edge * 2));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(edge) * edge * 4);
}
BENCHMARK(bm_bicubic_resize)->Arg(64)->Arg(256);

void bm_forward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.scale = 2;
  const Parameters<float> params = init_parameters<float>(cfg, 42);
  const Tensor<float> x = random_tensor({1, 1, 40, 32}, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(latis_forward(x, params, cfg));
  }
  state.SetItemsProcessed(state.iterations() * 40 * 32);
}
BENCHMARK(bm_forward);

}  // namespace

BENCHMARK_MAIN();
