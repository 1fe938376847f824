#include <benchmark/benchmark.h>

#include "scalecamo/attack.hpp"
#include "scalecamo/error.hpp"
#include "scalecamo/synthetic.hpp"

using namespace scalecamo;

namespace {

void BM_Craft(benchmark::State& state) {
  const int large = static_cast<int>(state.range(0));
  const auto f = synthetic::attack_fixture(3, {large, large}, {40, 40});
  CraftOptions options;
  options.strategy = state.range(1) ? CraftStrategy::two_stage : CraftStrategy::joint;
  const auto job = make_job(f.replica, f.target, 1.0, Algorithm::bilinear);
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(craft(job, options));
    } catch (const Error&) {
      state.SkipWithError("infeasible");
      break;
    }
  }
}

void BM_CraftLarge(benchmark::State& state) {
  const auto f = synthetic::attack_fixture(5, {1248, 1248}, {416, 416});
  const auto job = make_job(f.replica, f.target, 1.0, Algorithm::bilinear);
  for (auto _ : state) benchmark::DoNotOptimize(craft(job));
}

}  // namespace

BENCHMARK(BM_Craft)->ArgsProduct({{120, 200, 400}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CraftLarge)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
