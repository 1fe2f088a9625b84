#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "geolens/dataset/weights.hpp"

namespace geolens::patterns {

/// Unweighted modularity of `membership` (community index per node).
double modularity(const dataset::SpatialWeights& graph, const std::vector<std::size_t>& membership,
                  double resolution = 1.0);

struct LeidenOptions {
  double resolution = 1.0;
  double randomness = 0.01;  // refinement temperature
  std::uint64_t seed = 0;
  int max_levels = 64;
};

/// Leiden community detection. Communities are returned as sorted node lists,
/// ordered by size (descending) then smallest member; every community is
/// connected in `graph`.
std::vector<std::vector<std::size_t>> leiden_communities(const dataset::SpatialWeights& graph,
                                                         const LeidenOptions& options = {});

/// Community index per node for a list of communities covering 0..n-1.
std::vector<std::size_t> membership_of(const std::vector<std::vector<std::size_t>>& communities, std::size_t n);

}  // namespace geolens::patterns
