#include <benchmark/benchmark.h>

#include <random>

#include "derits/model.hpp"

using namespace derits;

namespace {

model::ModelConfig config(std::size_t lookback, unsigned branches) {
  model::ModelConfig c;
  c.lookback = lookback;
  c.horizon = 96;
  c.channels = 7;
  c.branches = branches;
  c.seed = 1;
  return c;
}

RealSeries noise(std::size_t length, std::size_t channels) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  RealSeries x(length, channels);
  for (double& v : x.values().flat()) v = n(rng);
  return x;
}

void BM_ModelForward(benchmark::State& state) {
  const auto params = model::init_params(config(state.range(0), unsigned(state.range(1))));
  const auto x = noise(state.range(0), 7);
  for (auto _ : state) benchmark::DoNotOptimize(model::model_forward(x, params));
}
BENCHMARK(BM_ModelForward)->Args({96, 1})->Args({96, 2})->Args({96, 3})->Args({336, 2});

void BM_ModelBackward(benchmark::State& state) {
  auto params = model::init_params(config(state.range(0), 2));
  const auto x = noise(state.range(0), 7);
  const auto grad = noise(96, 7);
  const auto cache = model::model_forward(x, params).second;
  for (auto _ : state) {
    model::zero_grad(params);
    benchmark::DoNotOptimize(model::model_backward(params, cache, grad));
  }
}
BENCHMARK(BM_ModelBackward)->Arg(96)->Arg(336);

}  // namespace

BENCHMARK_MAIN();
