#include <benchmark/benchmark.h>

#include <random>

#include "amber/fft.hpp"
#include "amber/layers.hpp"
#include "amber/model.hpp"
#include "amber/ops.hpp"

using namespace amber;

namespace {

Volume<float> random_volume(const Shape5& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Volume<float> v(shape);
  for (auto& x : v.data()) x = u(rng);
  return v;
}

Shape5 cube(std::size_t side, std::size_t channels) { return {1, side, side, side, channels}; }

void BM_Rfft3(benchmark::State& state) {
  const auto side = std::size_t(state.range(0));
  const auto x = random_volume(cube(side, 32), 1);
  for (auto _ : state) {
    auto spectrum = rfft3(x);
    benchmark::DoNotOptimize(spectrum);
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(x.size()));
}
BENCHMARK(BM_Rfft3)->Arg(8)->Arg(16)->Arg(32);

void BM_Rfft3RoundTrip(benchmark::State& state) {
  const auto side = std::size_t(state.range(0));
  const auto x = random_volume(cube(side, 32), 2);
  for (auto _ : state) {
    auto back = irfft3(rfft3(x), side);
    benchmark::DoNotOptimize(back);
  }
}
BENCHMARK(BM_Rfft3RoundTrip)->Arg(8)->Arg(16)->Arg(32);

void BM_Conv3x3x3(benchmark::State& state) {
  const auto side = std::size_t(state.range(0));
  const std::size_t c = 16;
  const ConvSpec spec = ConvSpec::cube(3, 1, 1, c, c);
  const auto x = random_volume(cube(side, c), 3);
  Tensor<float> w(conv_weight_shape(spec), 0.01f);
  const std::vector<float> bias(c, 0.0f);
  for (auto _ : state) {
    auto y = conv3d<float>(x, w, bias, spec);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_Conv3x3x3)->Arg(8)->Arg(16);

// Token-mixing sublayer forward and backward at a fixed width over growing grids.
void mixing(benchmark::State& state, MixingKind kind) {
  const auto side = std::size_t(state.range(0));
  const std::size_t c = 64;
  ParameterStore<float> store;
  AfnoConfig afno;
  afno.channels = c;
  afno.num_blocks = 8;
  MhsaConfig mhsa;
  mhsa.channels = c;
  mhsa.heads = 8;
  mhsa.max_tokens = side * side * side;
  MixingLayer<float> layer(store, "bench.mixing", kind, afno, mhsa);
  store.initialize(7);
  const auto x = random_volume(cube(side, c), 4);
  for (auto _ : state) {
    MixingCache<float> cache;
    auto y = layer.branch(x, &cache);
    auto g = layer.branch_backward(cache, y);
    benchmark::DoNotOptimize(g);
  }
  state.counters["tokens"] = double(side * side * side);
}
void BM_AfnoMixing(benchmark::State& state) { mixing(state, MixingKind::afno); }
void BM_MhsaMixing(benchmark::State& state) { mixing(state, MixingKind::mhsa); }
BENCHMARK(BM_AfnoMixing)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MhsaMixing)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void model_pass(benchmark::State& state, MixingKind kind, bool with_backward) {
  ModelConfig cfg;
  cfg.mixing = kind;
  SegmentationModel<float> model(cfg, 1);
  const auto x = random_volume(cube(16, cfg.in_channels), 5);
  for (auto _ : state) {
    ModelCache<float> cache;
    auto out = model.forward(x, with_backward, with_backward ? &cache : nullptr);
    if (with_backward) {
      std::vector<Volume<float>> grad_aux;
      for (const auto& a : out.aux) grad_aux.emplace_back(a.shape(), 0.0f);
      model.parameters().zero_grad();
      auto g = model.backward(cache, out.logits, grad_aux);
      benchmark::DoNotOptimize(g);
    }
    benchmark::DoNotOptimize(out);
  }
}
void BM_ModelForwardAfno(benchmark::State& s) { model_pass(s, MixingKind::afno, false); }
void BM_ModelForwardMhsa(benchmark::State& s) { model_pass(s, MixingKind::mhsa, false); }
void BM_ModelTrainStepAfno(benchmark::State& s) { model_pass(s, MixingKind::afno, true); }
void BM_ModelTrainStepMhsa(benchmark::State& s) { model_pass(s, MixingKind::mhsa, true); }
BENCHMARK(BM_ModelForwardAfno)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelForwardMhsa)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelTrainStepAfno)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelTrainStepMhsa)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
