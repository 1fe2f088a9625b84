#include <benchmark/benchmark.h>

#include "geolens/dataset/neighbors.hpp"
#include "geolens/dataset/synthetic.hpp"
#include "geolens/regression/calibrate.hpp"
#include "geolens/regression/gwr.hpp"
#include "geolens/regression/mgwr.hpp"
#include "geolens/regression/reference.hpp"

using namespace geolens;

namespace {

struct Fixture {
  dataset::GeoFeatureTable table;
  regression::ModelSpec spec;
  regression::Design design;
};

Fixture make(int side) {
  dataset::synthetic::Grid g;
  g.rows = side;
  g.cols = side;
  Fixture f;
  f.table = dataset::synthetic::grid_table(g, dataset::synthetic::multiscale_columns(1, side, side));
  f.spec.dependent = "y";
  f.spec.independents = {"x1", "x2"};
  f.spec.family = regression::Family::gwr;
  f.design = regression::standardize(f.table, f.spec);
  return f;
}

void gwr_parallel(benchmark::State& state) {
  const auto f = make(static_cast<int>(state.range(0)));
  const dataset::NeighborIndex index(f.table.centroids);
  const double bw = 0.2 * static_cast<double>(f.design.n());
  for (auto _ : state) benchmark::DoNotOptimize(regression::gwr_fit(f.design, index, {}, bw));
  state.counters["n"] = static_cast<double>(f.design.n());
}

void gwr_serial_reference(benchmark::State& state) {
  const auto f = make(static_cast<int>(state.range(0)));
  const auto distances = regression::reference::distance_matrix(f.table.centroids);
  const double bw = 0.2 * static_cast<double>(f.design.n());
  for (auto _ : state) {
    const auto w = regression::reference::weight_matrix(distances, bw, regression::Kernel::bisquare,
                                                         regression::BandwidthMode::adaptive);
    benchmark::DoNotOptimize(regression::reference::gwr_dense(f.design.X, f.design.y, w));
  }
  state.counters["n"] = static_cast<double>(f.design.n());
}

// Dense versus sparse smoother in the MGWR hat replay, selected via the memory budget.
void mgwr_replay(benchmark::State& state) {
  auto f = make(static_cast<int>(state.range(0)));
  f.spec.family = regression::Family::mgwr;
  regression::MgwrOptions options;
  if (state.range(1) == 0) options.replay_budget_bytes = std::size_t{1} << 20;
  const dataset::NeighborIndex index(f.table.centroids);
  for (auto _ : state) benchmark::DoNotOptimize(regression::mgwr_fit(f.design, index, f.spec, {}, options));
  state.counters["n"] = static_cast<double>(f.design.n());
}

}  // namespace

BENCHMARK(gwr_parallel)->Arg(10)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(gwr_serial_reference)->Arg(10)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(mgwr_replay)->Args({20, 0})->Args({20, 1})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
