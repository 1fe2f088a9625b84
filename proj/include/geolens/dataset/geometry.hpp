#pragma once

#include "geolens/dataset/table.hpp"

namespace geolens::dataset {

/// Shoelace signed area in coordinate units (counter-clockwise positive).
double signed_area(const Ring& ring);

/// Area-weighted centroid of the polygon with the largest exterior ring.
/// Holes are subtracted. Collinear rings fall back to the vertex mean.
LonLat representative_centroid(const Geometry& geometry);

}  // namespace geolens::dataset
