#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "geolens/dataset/table.hpp"

namespace geolens::dataset {

enum class Standardization { binary, row };

/// Symmetric neighbour lists. Edge weights are implied by the
/// standardization: 1 for binary, 1/degree for row-standardized.
struct SpatialWeights {
  std::vector<std::vector<std::size_t>> neighbors;
  Standardization standardization = Standardization::binary;
  /// Region pairs that overlap rather than touch; treated as adjacent.
  std::vector<std::string> notes;

  std::size_t size() const noexcept { return neighbors.size(); }
  double weight(std::size_t i) const {
    if (standardization == Standardization::binary) return 1.0;
    return neighbors[i].empty() ? 0.0 : 1.0 / static_cast<double>(neighbors[i].size());
  }
  /// Sum of all weights (S0).
  double total_weight() const;
  SpatialWeights row_standardized() const;
  /// Subgraph induced by `nodes`; indices are remapped to positions in `nodes`.
  SpatialWeights induced(const std::vector<std::size_t>& nodes) const;
};

/// Regions are neighbours iff their boundaries share at least one point.
SpatialWeights queen_adjacency(const GeoFeatureTable& table);

}  // namespace geolens::dataset
