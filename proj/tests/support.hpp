#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geolens/dataset/synthetic.hpp"
#include "geolens/dataset/weights.hpp"

namespace testing {

inline std::string fixtures(const std::string& rel) { return std::string(GEOLENS_FIXTURES) + "/" + rel; }

inline geolens::dataset::GeoFeatureTable grid(int rows, int cols, const std::map<std::string, std::vector<double>>& columns) {
  geolens::dataset::synthetic::Grid g;
  g.rows = rows;
  g.cols = cols;
  return geolens::dataset::synthetic::grid_table(g, columns);
}

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = N(rng);
  return v;
}

/// Graph from an explicit edge list.
inline geolens::dataset::SpatialWeights graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  geolens::dataset::SpatialWeights w;
  w.neighbors.resize(n);
  for (auto [a, b] : edges) {
    w.neighbors[a].push_back(b);
    w.neighbors[b].push_back(a);
  }
  for (auto& row : w.neighbors) std::sort(row.begin(), row.end());
  return w;
}

}  // namespace testing
