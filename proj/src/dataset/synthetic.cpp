#include "geolens/dataset/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "geolens/dataset/geojson.hpp"

namespace geolens::dataset::synthetic {

namespace {

double bump(double u, double v, double amplitude) {
  // Smooth 1..5 surface peaking near the grid centre.
  const double a = 36.0 - (6.0 - u / 2.0) * (6.0 - u / 2.0);
  const double b = 36.0 - (6.0 - v / 2.0) * (6.0 - v / 2.0);
  return 1.0 + amplitude * a * b / 1296.0;
}

}  // namespace

std::string grid_geojson(const Grid& grid, const std::map<std::string, std::vector<double>>& columns,
                         const std::function<std::string(int, int)>& name) {
  nlohmann::json features = nlohmann::json::array();
  auto corner = [&](int r, int c) {
    return nlohmann::json::array({grid.origin.lon + c * grid.cell_degrees, grid.origin.lat + r * grid.cell_degrees});
  };
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const auto i = static_cast<std::size_t>(r * grid.cols + c);
      nlohmann::json props = {{"rid", "r" + std::to_string(r) + "c" + std::to_string(c)}, {"row", r}, {"col", c}};
      if (name) props["name"] = name(r, c);
      for (const auto& [key, values] : columns) props[key] = values.at(i);
      nlohmann::json ring = {corner(r, c), corner(r, c + 1), corner(r + 1, c + 1), corner(r + 1, c), corner(r, c)};
      features.push_back({{"type", "Feature"},
                          {"properties", std::move(props)},
                          {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}}}});
    }
  }
  return nlohmann::json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump();
}

GeoFeatureTable grid_table(const Grid& grid, const std::map<std::string, std::vector<double>>& columns) {
  return load_geojson(grid_geojson(grid, columns), LoadOptions{"rid", false});
}

std::map<std::string, std::vector<double>> multiscale_columns(std::uint64_t seed, int rows, int cols, double amplitude) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<std::size_t>(rows * cols);
  std::vector<double> x1(n), x2(n), y(n), b1(n, 0.5), b2(n);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto i = static_cast<std::size_t>(r * cols + c);
      x1[i] = normal(rng);
      x2[i] = normal(rng);
      b2[i] = bump(c * 24.0 / cols, r * 24.0 / rows, amplitude);
      y[i] = b1[i] * x1[i] + b2[i] * x2[i] + 0.1 * normal(rng);
    }
  }
  return {{"y", y}, {"x1", x1}, {"x2", x2}, {"true_b1", b1}, {"true_b2", b2}};
}

std::map<std::string, std::vector<double>> linear_trend_columns(std::uint64_t seed, int side) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<std::size_t>(side * side);
  std::vector<double> x(n), y(n), b(n);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const auto i = static_cast<std::size_t>(r * side + c);
      x[i] = normal(rng);
      b[i] = 1.0 + 3.0 * c / (side - 1);
      y[i] = b[i] * x[i] + 0.1 * normal(rng);
    }
  }
  return {{"y", y}, {"x", x}, {"true_b", b}};
}

const std::vector<std::string>& election_covariates() {
  static const std::vector<std::string> names{"sex_ratio", "pct_black",  "pct_hisp",     "pct_bach",  "income",
                                              "pct_65_over", "pct_age_18_29", "gini",     "pct_manuf", "log_pop_den",
                                              "pct_3rd_party", "turn_out",   "pct_FB",     "pct_insured"};
  return names;
}

std::map<std::string, std::vector<double>> election_columns(std::uint64_t seed, int rows, int cols) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<std::size_t>(rows * cols);
  const auto& names = election_covariates();
  const auto p = names.size();

  // Covariates share a smooth regional component so they look spatially patterned.
  std::vector<std::vector<double>> x(p, std::vector<double>(n));
  for (std::size_t j = 0; j < p; ++j) {
    const double fu = 1.0 + static_cast<double>(j % 4);
    const double fv = 1.0 + static_cast<double>(j % 3);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double u = static_cast<double>(c) / cols, v = static_cast<double>(r) / rows;
        x[j][static_cast<std::size_t>(r * cols + c)] =
            0.6 * std::sin(std::numbers::pi * fu * u) * std::cos(std::numbers::pi * fv * v) + normal(rng);
      }
    }
  }

  auto beta = [&](std::size_t j, double u, double v) {
    switch (j % 3) {
      case 0: return 0.3 * (j % 2 ? 1.0 : -1.0);                 // global
      case 1: return 0.4 * (u - 0.5) + 0.2 * std::cos(3.0 * v);  // regional
      default: return 0.25 * std::sin(2.0 * std::numbers::pi * u) * std::sin(2.0 * std::numbers::pi * v);
    }
  };
  const std::size_t age = 6;
  auto age_beta = [&](double u, double v) {
    const auto pocket = [&](double cu, double cv) {
      return std::exp(-((u - cu) * (u - cu) + (v - cv) * (v - cv)) / (2.0 * 0.03 * 0.03));
    };
    const double west = u < 0.25 ? -0.5 : 0.0;
    return west + 0.8 * pocket(0.62, 0.55) + 0.8 * pocket(0.72, 0.5);
  };

  std::vector<double> dem(n), gop(n);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto i = static_cast<std::size_t>(r * cols + c);
      const double u = static_cast<double>(c) / cols, v = static_cast<double>(r) / rows;
      double eta = 0.3 * std::cos(2.0 * u) + 0.2 * normal(rng);
      for (std::size_t j = 0; j < p; ++j) eta += (j == age ? age_beta(u, v) : beta(j, u, v)) * x[j][i];
      dem[i] = 100.0 / (1.0 + std::exp(-0.35 * eta));
      const double third = std::clamp(4.0 + x[10][i], 0.5, 15.0);
      gop[i] = std::max(0.0, 100.0 - dem[i] - third);
    }
  }

  std::map<std::string, std::vector<double>> out;
  for (std::size_t j = 0; j < p; ++j) out[names[j]] = std::move(x[j]);
  out["pct_democrat"] = std::move(dem);
  out["pct_gop"] = std::move(gop);
  return out;
}

}  // namespace geolens::dataset::synthetic
