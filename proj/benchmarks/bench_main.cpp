#include <benchmark/benchmark.h>

#include "ppt/compress.hpp"
#include "ppt/flops.hpp"
#include "ppt/forward.hpp"
#include "ppt/io.hpp"
#include "ppt/vit.hpp"

using namespace ppt;

namespace {

CompressionSchedule three_stages(std::size_t r) {
  CompressionSchedule s;
  if (r > 0) s.stages = {{4, r}, {7, r}, {10, r}};
  return s;
}

void BM_ForwardDeitSmall(benchmark::State& state) {
  const ModelConfig config = ModelConfig::deit_small();
  const ModelWeights weights = synthetic_weights(config, 1);
  const Image image = normalize_image(synthetic_image(config.image_size, 2), Normalization{});
  const CompressionSchedule schedule = three_stages(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(model_forward(image, weights, config, schedule));
  }
}
BENCHMARK(BM_ForwardDeitSmall)->Arg(0)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_BsmMerge(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  TokenBatch batch{Matrix(n, 384), SizeVector(n, 1.0f)};
  Matrix keys(n, 64);
  for (float& v : batch.tokens.data()) v = static_cast<float>(rng.normal());
  for (float& v : keys.data()) v = static_cast<float>(rng.normal());
  for (auto _ : state) {
    benchmark::DoNotOptimize(bsm_merge(batch, keys, (n - 1) / 2));
  }
}
BENCHMARK(BM_BsmMerge)->Arg(197)->Arg(577);

void BM_ModelFlops(benchmark::State& state) {
  const ModelConfig config = ModelConfig::deit_base();
  const CompressionSchedule schedule = three_stages(47);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model_flops(config, schedule));
  }
}
BENCHMARK(BM_ModelFlops);

}  // namespace
BENCHMARK_MAIN();
