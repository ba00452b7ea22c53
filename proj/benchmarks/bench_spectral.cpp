#include <benchmark/benchmark.h>

#include <random>

#include "derits/spectral.hpp"

using namespace derits;

namespace {

RealSeries noise(std::size_t length, std::size_t channels) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  RealSeries x(length, channels);
  for (double& v : x.values().flat()) v = n(rng);
  return x;
}

void BM_DftForward(benchmark::State& state) {
  const auto x = noise(state.range(0), 7);
  const spectral::DftPlan plan(x.length());
  for (auto _ : state) benchmark::DoNotOptimize(plan.forward(x));
  state.SetItemsProcessed(state.iterations() * 7);
}
BENCHMARK(BM_DftForward)->Arg(96)->Arg(336)->Arg(720);

void BM_FdtRoundTrip(benchmark::State& state) {
  const auto x = noise(state.range(0), 7);
  for (auto _ : state) benchmark::DoNotOptimize(spectral::ifdt(spectral::fdt(x, 2), 2));
}
BENCHMARK(BM_FdtRoundTrip)->Arg(96)->Arg(336);

}  // namespace

BENCHMARK_MAIN();
