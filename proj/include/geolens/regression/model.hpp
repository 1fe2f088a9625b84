#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geolens/dataset/table.hpp"

namespace geolens::regression {

enum class Kernel { bisquare, gaussian, boxcar };
enum class BandwidthMode { adaptive, fixed };
enum class Family { ols, gwr, mgwr };

std::string_view to_string(Kernel k);
std::string_view to_string(BandwidthMode m);
std::string_view to_string(Family f);
Kernel kernel_from_string(std::string_view s);
BandwidthMode bandwidth_mode_from_string(std::string_view s);
Family family_from_string(std::string_view s);

struct Convergence {
  double tolerance = 1e-5;
  int max_iterations = 200;
  friend bool operator==(const Convergence&, const Convergence&) = default;
};

struct ModelSpec {
  std::string dependent;
  std::vector<std::string> independents;
  Kernel kernel = Kernel::bisquare;
  BandwidthMode bandwidth_mode = BandwidthMode::adaptive;
  Family family = Family::mgwr;
  std::optional<double> search_lo;
  std::optional<double> search_hi;
  /// Skips the GWR bandwidth search when set.
  std::optional<double> bandwidth;
  Convergence convergence;

  /// Structural checks; column checks too when a table is given.
  void validate(const dataset::GeoFeatureTable* table = nullptr) const;
  std::size_t parameter_count() const { return independents.size() + 1; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

struct StandardizationParams {
  std::string name;
  double mean = 0.0;
  double stddev = 1.0;  // population
  friend bool operator==(const StandardizationParams&, const StandardizationParams&) = default;
};

/// Standardized design: intercept column first, then the independents.
struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  StandardizationParams target;
  std::vector<StandardizationParams> covariates;
  std::vector<std::string> surface_names;  // "intercept", then independents
  std::vector<std::size_t> rows;           // table rows that entered the fit
  std::vector<std::string> region_ids;     // ids of `rows`
  std::vector<std::string> excluded_region_ids;

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t surfaces() const { return static_cast<std::size_t>(X.cols()); }
};

/// Z-scores every spec column over rows without missing values.
Design standardize(const dataset::GeoFeatureTable& table, const ModelSpec& spec);

struct BackfitIteration {
  int iteration = 0;
  std::vector<double> bandwidths;
  double soc = 0.0;
  double rss = 0.0;
};

/// Result of calibration. Arrays live on the standardized scale.
struct CalibratedModel {
  Family family = Family::ols;
  Kernel kernel = Kernel::bisquare;
  BandwidthMode bandwidth_mode = BandwidthMode::adaptive;
  std::vector<std::string> surface_names;
  std::vector<std::string> region_ids;
  std::vector<std::size_t> rows;
  Eigen::MatrixXd coefficients;  // n x (p+1)
  Eigen::MatrixXd local_se;      // n x (p+1)
  Eigen::VectorXd y;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;     // observed - predicted
  Eigen::VectorXd hat_diag;
  std::vector<double> bandwidths;  // empty (OLS), one (GWR) or p+1 (MGWR)
  std::vector<double> enp_per_surface;
  double hat_trace = 0.0;
  double sigma2 = 0.0;
  StandardizationParams target;
  std::vector<StandardizationParams> covariates;
  std::vector<BackfitIteration> trace;
  std::vector<std::string> excluded_region_ids;
  double replay_deviation = 0.0;  // max |C_j y - beta_j| after hat replay (MGWR)

  std::size_t n() const { return static_cast<std::size_t>(coefficients.rows()); }
  std::size_t surfaces() const { return static_cast<std::size_t>(coefficients.cols()); }
  std::size_t surface_index(const std::string& name) const;
  double rss() const { return residuals.squaredNorm(); }
  /// Coefficient of surface j at location i on the original data scale.
  double raw_coefficient(std::size_t i, std::size_t j) const;
};

nlohmann::json to_json(const CalibratedModel& m);
CalibratedModel model_from_json(const nlohmann::json& j);

struct Progress {
  std::string stage;
  int iteration = 0;
  double aicc = 0.0;
  double soc = 0.0;
};

/// Returning false requests cancellation.
using ProgressFn = std::function<bool(const Progress&)>;

}  // namespace geolens::regression
