// Microbenchmarks for the network: full forward/backward passes on the
// training frame size, the fusion module, one encoder layer, and the
// composite loss with cold and warm transport duals.

#include <benchmark/benchmark.h>

#include <random>

#include "ctas/adaptive_selection.hpp"
#include "ctas/loss.hpp"
#include "ctas/model.hpp"
#include "ctas/nets.hpp"
#include "ctas/syntheval.hpp"

using namespace ctas;

namespace {

DensityGrid benchmark_image() {
  SceneParams sp;
  sp.seed = 0;
  return scene_to_image(gen_scene(sp));
}

void BM_ModelForward(benchmark::State& state) {
  CtasModel model = make_model(NetConfig{}, 0);
  DensityGrid image = benchmark_image();
  for (auto _ : state) {
    ModelForward fwd = model_forward(model, image);
    benchmark::DoNotOptimize(fwd.prediction.values.data());
  }
}
BENCHMARK(BM_ModelForward);

void BM_ModelForwardBackward(benchmark::State& state) {
  CtasModel model = make_model(NetConfig{}, 0);
  DensityGrid image = benchmark_image();
  for (auto _ : state) {
    ModelForward fwd = model_forward(model, image);
    DensityGrid upstream = fwd.prediction;
    for (double& v : upstream.values) v = 1.0;
    zero_grads(model);
    model_backward(model, fwd, upstream);
    benchmark::DoNotOptimize(fwd.prediction.values.data());
  }
}
BENCHMARK(BM_ModelForwardBackward);

void BM_EncoderLayer(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  EncoderLayerParams p = make_encoder_layer(32, 4);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  TokenSequence z = TokenSequence::zeros(n, 32);
  for (double& v : z.values) v = gauss(rng);
  for (auto _ : state) {
    TokenSequence out = encoder_layer(z, p);
    benchmark::DoNotOptimize(out.values.data());
  }
}
BENCHMARK(BM_EncoderLayer)->Arg(16)->Arg(64);

void BM_AsmFuse(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mass(0.0, 1.0);
  DensityGrid d_t = DensityGrid::zeros(16, 16), d_c = DensityGrid::zeros(16, 16);
  for (double& v : d_t.values) v = mass(rng);
  for (double& v : d_c.values) v = mass(rng);
  AsmParams p;
  for (auto _ : state) {
    AsmForward f = asm_forward(d_t, d_c, p);
    benchmark::DoNotOptimize(f.fused.values.data());
  }
}
BENCHMARK(BM_AsmFuse);

void BM_CombinedLoss(benchmark::State& state) {
  bool warm = state.range(0) == 1;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mass(0.01, 1.0);
  DensityGrid z = DensityGrid::zeros(16, 16), zhat = DensityGrid::zeros(16, 16);
  for (double& v : z.values) v = mass(rng);
  for (double& v : zhat.values) v = mass(rng);
  DualCache cache;
  for (auto _ : state) {
    LossBreakdown lb = combined_loss(z, zhat, CostSpec::correntropy(4.0),
                                     SolverConfig::training(), warm ? &cache : nullptr);
    benchmark::DoNotOptimize(lb.total);
  }
}
BENCHMARK(BM_CombinedLoss)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
