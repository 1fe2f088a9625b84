#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace geolens::dataset {

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
  friend bool operator==(const LonLat&, const LonLat&) = default;
};

/// Planar coordinate on the dataset's local projection (kilometres unless
/// the table was loaded in planar mode, where input units pass through).
struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
};

using Ring = std::vector<LonLat>;

struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

/// A polygon is stored as a multipolygon with one member.
struct Geometry {
  std::vector<Polygon> polygons;
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Azimuthal equidistant projection centred on the bounding-box midpoint.
struct Projection {
  bool planar_passthrough = false;
  LonLat origin;

  PlanarPoint project(const LonLat& p) const;
  friend bool operator==(const Projection&, const Projection&) = default;
};

/// Regions with geometry, centroids and numeric attribute columns.
/// Missing numeric values are stored as NaN and the row is flagged.
struct GeoFeatureTable {
  std::vector<std::string> region_ids;
  std::vector<Geometry> geometries;
  std::vector<LonLat> geo_centroids;
  std::vector<PlanarPoint> centroids;
  std::map<std::string, std::vector<double>> columns;
  std::vector<nlohmann::json> metadata;  // non-numeric properties, one object per region
  Projection projection;

  std::size_t size() const noexcept { return region_ids.size(); }
  bool has_column(const std::string& name) const { return columns.contains(name); }
  const std::vector<double>& column(const std::string& name) const;
  std::size_t index_of(const std::string& region_id) const;

  /// Rows with at least one missing numeric value among `names`
  /// (all columns when `names` is empty).
  std::vector<std::size_t> flagged_rows(const std::vector<std::string>& names = {}) const;

  /// Copy with `name` added or replaced.
  GeoFeatureTable with_column(const std::string& name, std::vector<double> values) const;

  /// Copy restricted to `rows`, in the given order.
  GeoFeatureTable subset(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const GeoFeatureTable&, const GeoFeatureTable&) = default;
};

/// Columnar JSON layout used inside state files.
nlohmann::json to_json(const GeoFeatureTable& table);
GeoFeatureTable table_from_json(const nlohmann::json& j);

/// Content hash of the canonical columnar layout.
std::string fingerprint(const GeoFeatureTable& table);

}  // namespace geolens::dataset
