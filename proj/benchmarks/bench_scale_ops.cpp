#include <benchmark/benchmark.h>

#include "scalecamo/scale_ops.hpp"
#include "scalecamo/synthetic.hpp"

using namespace scalecamo;

namespace {

Algorithm algorithm_arg(const benchmark::State& state) { return static_cast<Algorithm>(state.range(0)); }

void BM_BuildOperator(benchmark::State& state) {
  const Size src{static_cast<int>(state.range(1)), static_cast<int>(state.range(1))};
  for (auto _ : state) benchmark::DoNotOptimize(build_operator(algorithm_arg(state), src, {416, 416}));
}

void BM_Downscale(benchmark::State& state) {
  const Size src{static_cast<int>(state.range(1)), static_cast<int>(state.range(1))};
  const auto image = synthetic::smooth_image(1, src);
  const auto op = build_operator(algorithm_arg(state), src, {416, 416});
  for (auto _ : state) benchmark::DoNotOptimize(downscale(image, op));
  state.SetItemsProcessed(state.iterations() * image.sample_count());
}

void BM_ResizeDirect(benchmark::State& state) {
  const Size src{static_cast<int>(state.range(1)), static_cast<int>(state.range(1))};
  const auto image = synthetic::smooth_image(1, src);
  for (auto _ : state) benchmark::DoNotOptimize(resize_direct(image, algorithm_arg(state), {416, 416}));
  state.SetItemsProcessed(state.iterations() * image.sample_count());
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int alg = 0; alg < 3; ++alg) {
    for (int side : {832, 1248}) b->Args({alg, side});
  }
}

}  // namespace

BENCHMARK(BM_BuildOperator)->Apply(sizes);
BENCHMARK(BM_Downscale)->Apply(sizes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ResizeDirect)->Apply(sizes)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
