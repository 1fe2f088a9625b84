#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace geolens::screening {

enum class TransformKind { log, log1p, sqrt, zscore };

std::string_view to_string(TransformKind kind);
TransformKind transform_from_string(std::string_view name);

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::size_t> counts;
};

struct FeatureProfile {
  std::size_t count = 0;  // non-missing values
  double mean = 0.0;
  double stddev = 0.0;    // sample (n-1)
  double skewness = 0.0;  // adjusted Fisher-Pearson
  double ks_statistic = 0.0;
  double ks_p = 1.0;      // asymptotic, conservative with estimated parameters
  bool strictly_positive = false;
  bool non_negative = false;
  Histogram histogram;
  std::vector<TransformKind> suggested_transforms;
};

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

/// NaN entries are treated as missing. Needs at least 8 values.
FeatureProfile profile_feature(std::span<const double> column, std::size_t bins = 20);

/// Elementwise transform; NaN passes through. `region_ids`, when given, name
/// offending rows in domain errors.
std::vector<double> apply_transform(std::span<const double> column, TransformKind kind,
                                    std::span<const std::string> region_ids = {});

inline constexpr double kStrongCorrelation = 0.7;
inline constexpr double kSevereVif = 10.0;

struct CorrelationResult {
  std::string x;
  std::string y;
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  bool flagged_strong = false;
};

CorrelationResult pearson(std::span<const double> x, std::span<const double> y,
                          double strong_threshold = kStrongCorrelation);

struct VifResult {
  std::vector<double> values;      // +inf for perfectly collinear columns
  std::vector<bool> severe;        // VIF > 10
  std::vector<bool> collinear;
};

/// Variance inflation of each column against the others plus an intercept.
VifResult vif(const Eigen::MatrixXd& independents);

struct ClassBreak {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

struct QuantileClasses {
  std::vector<int> classes;        // -1 for missing values
  std::vector<ClassBreak> breaks;  // one per realised class
  int requested = 0;
  bool reduced = false;            // fewer classes than requested
};

QuantileClasses classify_quantile(std::span<const double> values, int k = 5);

enum class Zone { diagonal, above, below };
std::string_view to_string(Zone zone);

struct BivariateClasses {
  std::vector<int> rows;  // dependent-variable class
  std::vector<int> cols;  // independent-variable class
  std::vector<Zone> zones;
  QuantileClasses dependent;
  QuantileClasses independent;
  int k = 0;
};

BivariateClasses classify_bivariate(std::span<const double> dep, std::span<const double> ind, int k = 4);

nlohmann::json to_json(const FeatureProfile& p);
FeatureProfile profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorrelationResult& r);
CorrelationResult correlation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VifResult& v);
nlohmann::json to_json(const QuantileClasses& q);
nlohmann::json to_json(const BivariateClasses& b);

}  // namespace geolens::screening
