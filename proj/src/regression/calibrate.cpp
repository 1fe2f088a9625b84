#include "geolens/regression/calibrate.hpp"

#include "geolens/common/error.hpp"
#include "geolens/dataset/neighbors.hpp"
#include "geolens/regression/gwr.hpp"
#include "geolens/regression/mgwr.hpp"
#include "geolens/regression/ols.hpp"

namespace geolens::regression {

CalibratedModel calibrate(const dataset::GeoFeatureTable& table, const ModelSpec& spec, const ProgressFn& progress) {
  const auto design = standardize(table, spec);
  if (spec.family == Family::ols) return ols_model(design);

  std::vector<dataset::PlanarPoint> points;
  points.reserve(design.n());
  for (auto r : design.rows) points.push_back(table.centroids[r]);
  const dataset::NeighborIndex index(points);

  if (spec.family == Family::gwr) {
    const auto bw = select_gwr_bandwidth(design, index, spec, progress);
    if (progress && !progress({"fitting", 1, bw.score, 0.0})) throw Error(ErrorCode::cancelled, "calibration cancelled");
    return gwr_fit(design, index, LocalKernel{spec.kernel, spec.bandwidth_mode}, bw.bandwidth);
  }
  return mgwr_fit(design, index, spec, progress);
}

}  // namespace geolens::regression
