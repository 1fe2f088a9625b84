#pragma once

#include <atomic>

#include "geolens/dataset/neighbors.hpp"
#include "geolens/regression/golden.hpp"
#include "geolens/regression/model.hpp"

namespace geolens::regression {

struct LocalKernel {
  Kernel kernel = Kernel::bisquare;
  BandwidthMode mode = BandwidthMode::adaptive;
};

/// Per-location bandwidth distance: kth distance counting the location
/// itself (adaptive) or the bandwidth itself (fixed).
double location_bandwidth(const dataset::NeighborIndex& index, std::size_t i, double bandwidth, BandwidthMode mode);

/// Kernel support of location i: neighbour indices and weights.
void local_support(const dataset::NeighborIndex& index, std::size_t i, double bandwidth, const LocalKernel& k,
                   std::vector<std::uint32_t>& ids, std::vector<double>& weights);

/// Cheap summary used by the bandwidth search.
struct GwrScore {
  double rss = 0.0;
  double trace = 0.0;
  double aicc = 0.0;
};

GwrScore gwr_score(const Design& design, const dataset::NeighborIndex& index, const LocalKernel& k, double bandwidth);

/// Full calibration at a given bandwidth (OpenMP across locations).
CalibratedModel gwr_fit(const Design& design, const dataset::NeighborIndex& index, const LocalKernel& k, double bandwidth);

/// Default search bounds: [p+2, n] adaptive, or distance bounds in fixed mode.
std::pair<double, double> search_range(const ModelSpec& spec, const dataset::NeighborIndex& index, std::size_t parameters);

GoldenResult select_gwr_bandwidth(const Design& design, const dataset::NeighborIndex& index, const ModelSpec& spec,
                                  const ProgressFn& progress = {});

}  // namespace geolens::regression
