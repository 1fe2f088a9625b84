#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "geolens/dataset/table.hpp"

namespace geolens::dataset {

struct KnnResult {
  std::vector<double> distances;
  /// Regions whose kth neighbour sits at distance zero.
  std::vector<std::size_t> zero_distance_regions;
};

/// Distance from each centroid to its kth nearest other centroid.
KnnResult knn_distances(std::span<const PlanarPoint> points, std::size_t k);
KnnResult knn_distances(const GeoFeatureTable& table, std::size_t k);

/// For every location, all locations (itself included) ordered by
/// (distance, index). Row-major n x n storage.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  explicit NeighborIndex(std::span<const PlanarPoint> points);

  std::size_t size() const noexcept { return n_; }
  std::span<const double> distances(std::size_t i) const { return {dist_.data() + i * n_, n_}; }
  std::span<const std::uint32_t> order(std::size_t i) const { return {idx_.data() + i * n_, n_}; }
  /// Distance to the kth closest location counting the location itself (k >= 1).
  double kth_with_self(std::size_t i, std::size_t k) const { return dist_[i * n_ + (k - 1)]; }
  double max_distance() const noexcept { return max_distance_; }
  double distance(std::size_t i, std::size_t j) const;

 private:
  std::size_t n_ = 0;
  std::vector<PlanarPoint> points_;
  std::vector<double> dist_;
  std::vector<std::uint32_t> idx_;
  double max_distance_ = 0.0;
};

}  // namespace geolens::dataset
