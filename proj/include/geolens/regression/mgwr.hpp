#pragma once

#include "geolens/dataset/neighbors.hpp"
#include "geolens/regression/gwr.hpp"
#include "geolens/regression/model.hpp"

namespace geolens::regression {

struct MgwrOptions {
  /// Stop re-searching a surface's bandwidth once it repeats this many times.
  int stable_bandwidth_repeats = 5;
  /// Memory budget for the hat-matrix replay; columns are processed in chunks.
  std::size_t replay_budget_bytes = std::size_t{512} << 20;
};

/// Single-covariate local fit used inside backfitting: regresses `target`
/// on column `j` of the design with location-specific kernel weights.
struct SurfaceFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd fitted;
  double trace = 0.0;
  double rss = 0.0;
  double aicc = 0.0;
};

SurfaceFit fit_surface(const Eigen::VectorXd& x, const Eigen::VectorXd& target, const dataset::NeighborIndex& index,
                       const LocalKernel& k, double bandwidth);

CalibratedModel mgwr_fit(const Design& design, const dataset::NeighborIndex& index, const ModelSpec& spec,
                         const ProgressFn& progress = {}, const MgwrOptions& options = {});

}  // namespace geolens::regression
