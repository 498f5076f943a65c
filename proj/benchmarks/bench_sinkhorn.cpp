// Microbenchmarks for the transport solver: annealed entropic solves at the
// support sizes the training loop actually produces, the exact solver on the
// small instances it is meant for, and cost-matrix construction.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ctas/correntropy.hpp"
#include "ctas/ot.hpp"

using namespace ctas;

namespace {

struct Instance {
  std::vector<Point> src, dst;
  std::vector<double> mu, nu;
  CostMatrix cost;
};

Instance make_instance(int n, int m, std::uint64_t seed, const CostSpec& spec) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, 16.0), mass(0.05, 1.0);
  Instance inst;
  auto simplex = [&](int k) {
    std::vector<double> v(k);
    double s = 0.0;
    for (double& x : v) s += (x = mass(rng));
    for (double& x : v) x /= s;
    return v;
  };
  for (int i = 0; i < n; ++i) inst.src.push_back({coord(rng), coord(rng)});
  for (int j = 0; j < m; ++j) inst.dst.push_back({coord(rng), coord(rng)});
  inst.mu = simplex(n);
  inst.nu = simplex(m);
  inst.cost = build_cost(inst.src, inst.dst, spec);
  return inst;
}

void BM_SinkhornTraining(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Instance inst = make_instance(n, n, 7, CostSpec::correntropy(4.0));
  for (auto _ : state) {
    TransportPlan plan = sinkhorn_annealed(inst.cost, inst.mu, inst.nu,
                                           SolverConfig::training());
    benchmark::DoNotOptimize(plan.attained_cost);
  }
}
BENCHMARK(BM_SinkhornTraining)->Arg(16)->Arg(64)->Arg(256);

void BM_SinkhornTrainingWarm(benchmark::State& state) {
  // Same solve with a persistent dual cache, the configuration the training
  // loop runs after its first step.
  int n = static_cast<int>(state.range(0));
  Instance inst = make_instance(n, n, 7, CostSpec::correntropy(4.0));
  DualCache cache;
  for (auto _ : state) {
    TransportPlan plan = sinkhorn_annealed(inst.cost, inst.mu, inst.nu,
                                           SolverConfig::training(), &cache);
    benchmark::DoNotOptimize(plan.attained_cost);
  }
}
BENCHMARK(BM_SinkhornTrainingWarm)->Arg(64)->Arg(256);

void BM_SinkhornAccurate(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Instance inst = make_instance(n, n, 7, CostSpec::l2());
  for (auto _ : state) {
    TransportPlan plan = sinkhorn_annealed(inst.cost, inst.mu, inst.nu,
                                           SolverConfig::accurate());
    benchmark::DoNotOptimize(plan.attained_cost);
  }
}
BENCHMARK(BM_SinkhornAccurate)->Arg(8)->Arg(16)->Arg(64);

void BM_ExactTransport(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Instance inst = make_instance(n, n, 7, CostSpec::l2());
  for (auto _ : state) {
    TransportPlan plan = exact_ot(inst.cost, inst.mu, inst.nu);
    benchmark::DoNotOptimize(plan.attained_cost);
  }
}
BENCHMARK(BM_ExactTransport)->Arg(4)->Arg(6)->Arg(8);

void BM_BuildCost(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  CostSpec spec = state.range(1) == 0 ? CostSpec::l2() : CostSpec::correntropy(4.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coord(0.0, 16.0);
  std::vector<Point> src, dst;
  for (int i = 0; i < n; ++i) {
    src.push_back({coord(rng), coord(rng)});
    dst.push_back({coord(rng), coord(rng)});
  }
  for (auto _ : state) {
    CostMatrix c = build_cost(src, dst, spec);
    benchmark::DoNotOptimize(c.costs.data());
  }
}
BENCHMARK(BM_BuildCost)->Args({256, 0})->Args({256, 1});

}  // namespace

BENCHMARK_MAIN();
