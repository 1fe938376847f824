#include <benchmark/benchmark.h>

#include "scalecamo/detector.hpp"
#include "scalecamo/synthetic.hpp"

using namespace scalecamo;

namespace {

const RasterImage& image() {
  static const auto img = synthetic::scene(9, {832, 832}).quantized();
  return img;
}

void BM_ScalingTest(benchmark::State& state) {
  const DetectionConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(scaling_test(image(), cfg));
}

void BM_FilteringTest(benchmark::State& state) {
  DetectionConfig cfg;
  cfg.filter_window = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(filtering_test(image(), cfg));
}

void BM_SteganalysisTest(benchmark::State& state) {
  const DetectionConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(steganalysis_test(image(), cfg));
}

}  // namespace

BENCHMARK(BM_ScalingTest)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FilteringTest)->Arg(2)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SteganalysisTest)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
