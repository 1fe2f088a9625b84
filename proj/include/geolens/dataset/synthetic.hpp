#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "geolens/dataset/table.hpp"

namespace geolens::dataset::synthetic {

/// Square cells on a lon/lat grid, row-major from the south-west corner.
struct Grid {
  int rows = 20;
  int cols = 20;
  double cell_degrees = 0.1;
  LonLat origin{-88.0, 38.0};
};

/// Grid cells as a GeoJSON FeatureCollection with the given columns
/// (each of length rows*cols) and an id property "rid".
std::string grid_geojson(const Grid& grid, const std::map<std::string, std::vector<double>>& columns,
                         const std::function<std::string(int, int)>& name = {});

/// Loads `grid_geojson` output through the regular ingestion path.
GeoFeatureTable grid_table(const Grid& grid, const std::map<std::string, std::vector<double>>& columns);

/// 20x20 grid: y = 0.5 x1 + b2(u,v) x2 + N(0, 0.1^2) with a smooth bump b2.
/// Columns: y, x1, x2, true_b1, true_b2.
std::map<std::string, std::vector<double>> multiscale_columns(std::uint64_t seed, int rows = 20, int cols = 20,
                                                             double amplitude = 4.0);

/// 10x10 grid: y = b(u) x + noise with b varying linearly across the grid.
/// Columns: y, x, true_b.
std::map<std::string, std::vector<double>> linear_trend_columns(std::uint64_t seed, int side = 10);

/// Election-shaped data: a dependent share, 14 covariates with their own
/// spatial scales and pct_gop. Pockets of positive pct_age_18_29 effect are
/// planted in an otherwise negative-or-null surface.
std::map<std::string, std::vector<double>> election_columns(std::uint64_t seed, int rows, int cols);

/// Names of the 14 election covariates in model order.
const std::vector<std::string>& election_covariates();

}  // namespace geolens::dataset::synthetic
