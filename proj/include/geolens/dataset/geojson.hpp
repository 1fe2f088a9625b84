#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "geolens/dataset/table.hpp"

namespace geolens::dataset {

struct LoadOptions {
  /// Property holding the region key; feature index is used when unset.
  std::optional<std::string> id_key;
  /// Treat coordinates as already planar and skip the projection.
  bool planar = false;
};

/// Parses a GeoJSON FeatureCollection of Polygon/MultiPolygon features.
GeoFeatureTable load_geojson(std::string_view bytes, const LoadOptions& options = {});

/// Writes the table back as a FeatureCollection (centroids are recomputed on load).
std::string to_geojson(const GeoFeatureTable& table);

}  // namespace geolens::dataset
