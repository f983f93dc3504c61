#include <benchmark/benchmark.h>

#include "vsensor/baselines.hpp"
#include "vsensor/geograph.hpp"
#include "vsensor/pipeline.hpp"
#include "vsensor/sage.hpp"
#include "vsensor/synthgen.hpp"

using namespace vsensor;

namespace {

Dataset city(std::size_t sensors, std::size_t hours) {
  CityConfig c;
  c.n_sensors = sensors;
  c.n_hours = hours;
  return prepare(generate_city(c));
}

void BM_Haversine(benchmark::State& st) {
  LatLon a{51.4545, -2.5879}, b{51.5072, -0.1276};
  for (auto _ : st) {
    benchmark::DoNotOptimize(haversine(a, b));
    a.lat += 1e-9;
  }
}
BENCHMARK(BM_Haversine);

void BM_KnnGraph(benchmark::State& st) {
  const Dataset ds = city(static_cast<std::size_t>(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(build_knn_graph(ds.locations, 3));
}
BENCHMARK(BM_KnnGraph)->Arg(8)->Arg(60)->Arg(200);

void BM_SageForward(benchmark::State& st) {
  const Dataset ds = city(60, 2);
  const SpatialGraph g = build_knn_graph(ds.locations, 3);
  SageConfig cfg;
  cfg.aggregator = static_cast<AggregatorKind>(st.range(0));
  Rng rng(1);
  const SageModel m(FeatureSchema::kWidth, cfg, rng);
  const Tensor2& x = ds.frames[1].features;
  std::size_t node = 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(sage_forward(m, g, x, node, rng, Mode::Eval));
    node = (node + 1) % ds.n_sensors();
  }
  st.SetLabel(to_string(cfg.aggregator));
}
BENCHMARK(BM_SageForward)->DenseRange(0, 3);

void BM_TrainEpoch(benchmark::State& st) {
  const Dataset ds = city(8, 500);
  const SpatialGraph g = build_knn_graph(ds.locations, 3);
  TrainConfig cfg;
  cfg.model.kind = static_cast<ModelKind>(st.range(0));
  cfg.epochs = 1;
  for (auto _ : st) benchmark::DoNotOptimize(train(ds, g, cfg));
  st.SetLabel(to_string(cfg.model.kind));
}
BENCHMARK(BM_TrainEpoch)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_GbtFit(benchmark::State& st) {
  Rng rng(3);
  std::normal_distribution<double> n01;
  const std::size_t n = static_cast<std::size_t>(st.range(0));
  Tensor2 x(n, FeatureSchema::kWidth);
  for (double& v : x.values()) v = n01(rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 3 * x(i, 0) - x(i, 5) * x(i, 7) + n01(rng);
  GbtConfig cfg;
  cfg.n_trees = 20;
  for (auto _ : st) benchmark::DoNotOptimize(gbt_fit(x, y, cfg));
}
BENCHMARK(BM_GbtFit)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
