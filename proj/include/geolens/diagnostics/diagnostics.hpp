#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geolens/dataset/table.hpp"
#include "geolens/dataset/weights.hpp"
#include "geolens/regression/model.hpp"

namespace geolens::diagnostics {

struct GlobalDiagnostics {
  double aicc = 0.0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
};

GlobalDiagnostics global_diagnostics(const regression::CalibratedModel& model);

struct LocalR2 {
  std::vector<double> values;  // clamped into [0, 1]; NaN where undefined
  std::vector<double> raw;
  std::vector<bool> clamped;
  std::vector<bool> undefined;
  double bandwidth = 0.0;
};

/// Kernel-weighted R^2 around every location using the model's fitted values.
/// MGWR uses the median of its per-surface bandwidths.
LocalR2 local_r2(const regression::CalibratedModel& model, const dataset::GeoFeatureTable& table);

struct CooksD {
  std::vector<double> values;  // +inf where h_ii = 1
  std::vector<bool> outlier;
  double threshold = 0.0;
};

CooksD cooks_d(const regression::CalibratedModel& model);
CooksD cooks_d(const regression::CalibratedModel& model, double threshold);

/// Sign convention of narrated residuals.
enum class ResidualConvention { predicted_minus_observed, observed_minus_predicted };
enum class ResidualLabel { over, under, neutral };

std::string_view to_string(ResidualLabel l);
std::string_view to_string(ResidualConvention c);
ResidualConvention residual_convention_from_string(std::string_view s);

struct StdResiduals {
  std::vector<double> values;
  std::vector<ResidualLabel> labels;
  ResidualConvention convention = ResidualConvention::predicted_minus_observed;
};

/// e_i / (sigma * sqrt(1 - h_ii)); positive values are labelled over.
StdResiduals std_residuals(const regression::CalibratedModel& model,
                           ResidualConvention convention = ResidualConvention::predicted_minus_observed);

struct MoransI {
  double statistic = 0.0;
  double expected = 0.0;
  double p_value = 1.0;  // pseudo p from permutations
  int permutations = 0;
  std::uint64_t seed = 0;
};

/// Global Moran's I on row-standardized weights with a seeded permutation test.
MoransI morans_i(const std::vector<double>& values, const dataset::SpatialWeights& weights, int permutations,
                 std::uint64_t seed);

struct Significance {
  double xi = 0.05;
  std::vector<double> adjusted_alpha;  // per surface
  std::vector<double> t_critical;      // per surface
  double dof = 0.0;
  Eigen::MatrixXd t_values;
  std::vector<std::vector<bool>> mask;  // [surface][location]
  std::vector<std::vector<bool>> zero_se;
};

Significance significance_mask(const regression::CalibratedModel& model, double xi);

struct Options {
  double xi = 0.05;
  int permutations = 999;
  std::uint64_t seed = 0;
  ResidualConvention convention = ResidualConvention::predicted_minus_observed;
};

struct DiagnosticsReport {
  GlobalDiagnostics global;
  LocalR2 local_r2;
  CooksD cooks_d;
  StdResiduals std_residuals;
  MoransI morans_i_residuals;
  Significance significance;
  std::vector<std::string> region_ids;
};

/// Everything above for one model. `weights` covers the full table; it is
/// restricted to the model's rows here.
DiagnosticsReport diagnose(const regression::CalibratedModel& model, const dataset::GeoFeatureTable& table,
                           const dataset::SpatialWeights& weights, const Options& options);

nlohmann::json to_json(const DiagnosticsReport& r);
DiagnosticsReport report_from_json(const nlohmann::json& j);

}  // namespace geolens::diagnostics
