#include "geolens/dataset/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geolens/common/error.hpp"

namespace geolens::dataset {

namespace {

double point_distance(const PlanarPoint& a, const PlanarPoint& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

KnnResult knn_distances(std::span<const PlanarPoint> points, std::size_t k) {
  const std::size_t n = points.size();
  if (n < 2 || k < 1 || k > n - 1) {
    throw Error(ErrorCode::out_of_range, "k must lie in [1, n-1]", {{"k", k}, {"n", n}});
  }
  KnnResult result;
  result.distances.resize(n);
  std::vector<double> d;
  d.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    d.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back(point_distance(points[i], points[j]));
    }
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    result.distances[i] = d[k - 1];
    if (d[k - 1] == 0.0) result.zero_distance_regions.push_back(i);
  }
  return result;
}

KnnResult knn_distances(const GeoFeatureTable& table, std::size_t k) { return knn_distances(table.centroids, k); }

NeighborIndex::NeighborIndex(std::span<const PlanarPoint> points)
    : n_(points.size()), points_(points.begin(), points.end()), dist_(n_ * n_), idx_(n_ * n_) {
  const auto n = static_cast<std::ptrdiff_t>(n_);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i) * n_;
    std::vector<std::uint32_t> order(n_);
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::vector<double> d(n_);
    for (std::size_t j = 0; j < n_; ++j) d[j] = point_distance(points[static_cast<std::size_t>(i)], points[j]);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return d[a] < d[b] || (d[a] == d[b] && a < b);
    });
    for (std::size_t j = 0; j < n_; ++j) {
      idx_[row + j] = order[j];
      dist_[row + j] = d[order[j]];
    }
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (n_ > 0) max_distance_ = std::max(max_distance_, dist_[i * n_ + n_ - 1]);
  }
}

double NeighborIndex::distance(std::size_t i, std::size_t j) const {
  return point_distance(points_[i], points_[j]);
}

}  // namespace geolens::dataset
