#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geolens/dataset/table.hpp"
#include "geolens/dataset/weights.hpp"
#include "geolens/regression/model.hpp"

namespace geolens::patterns {

enum class Sign { positive, negative };
std::string_view to_string(Sign s);

struct SignSplit {
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
  /// Significant entries that are exactly 0.0 (counted as positive).
  std::vector<std::size_t> zeros;
};

SignSplit split_significant(std::span<const double> surface, const std::vector<bool>& mask);

struct Cluster {
  std::string id;  // "<surface>/<sign>/<k>"
  Sign sign = Sign::positive;
  std::vector<std::string> region_ids;
  std::vector<std::size_t> rows;  // model rows
  double mean_coefficient = 0.0;    // data scale
  double mean_standardized = 0.0;
  dataset::LonLat centroid;
  dataset::LonLat extent_min;
  dataset::LonLat extent_max;
  std::string location_identifier;

  std::size_t size() const { return region_ids.size(); }
  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct ClusterSet {
  std::string surface;
  std::vector<Cluster> positive_clusters;
  std::vector<Cluster> negative_clusters;
  std::vector<std::string> isolated;
  std::vector<std::string> zero_coefficient;

  const Cluster* find(const std::string& id) const;
  friend bool operator==(const ClusterSet&, const ClusterSet&) = default;
};

struct ClusterParams {
  double resolution = 1.0;
  std::size_t min_size = 2;
  std::uint64_t seed = 0;
};

/// Significant regions of one surface, split by sign, partitioned into
/// connected queen-contiguous communities. `weights` spans the whole table.
ClusterSet detect_clusters(const std::string& surface, const regression::CalibratedModel& model,
                           const std::vector<bool>& mask, const dataset::SpatialWeights& weights,
                           const dataset::GeoFeatureTable& table, const ClusterParams& params = {});

/// Mean coefficient on the data scale. Covariates are back-transformed to
/// units of y per unit of x; the intercept is reported as its deviation from
/// the mean of y.
double data_scale_coefficient(const regression::CalibratedModel& model, std::size_t row, std::size_t surface);

nlohmann::json to_json(const ClusterSet& c);
ClusterSet cluster_set_from_json(const nlohmann::json& j);

}  // namespace geolens::patterns
