#include <benchmark/benchmark.h>

#include "blinkkit/classifier.hpp"
#include "blinkkit/network.hpp"
#include "blinkkit/random.hpp"
#include "blinkkit/synthdata.hpp"

using namespace blinkkit;

namespace {

std::vector<float> batch_inputs(std::size_t n) {
  const auto crops = synthetic_crop_dataset(n, 1);
  std::vector<float> in;
  for (const auto& c : crops) in.insert(in.end(), c.crop.pixels.begin(), c.crop.pixels.end());
  return in;
}

void BM_Predict(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto model = build_model(ModelConfig{}, 3);
  const auto in = batch_inputs(n);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(in, n));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Predict)->Arg(1)->Arg(13)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto model = build_model(ModelConfig{}, 3);
  const auto in = batch_inputs(n);
  std::vector<float> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 2 ? 1.0f : 0.0f;
  rnd::Engine rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(model.train_step(in, labels, 1e-3, rng));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
