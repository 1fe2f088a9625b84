#include "geolens/regression/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"

namespace geolens::regression {

using nlohmann::json;

std::string_view to_string(Kernel k) {
  switch (k) {
    case Kernel::bisquare: return "bisquare";
    case Kernel::gaussian: return "gaussian";
    case Kernel::boxcar: return "boxcar";
  }
  return "?";
}

std::string_view to_string(BandwidthMode m) { return m == BandwidthMode::adaptive ? "adaptive" : "fixed"; }

std::string_view to_string(Family f) {
  switch (f) {
    case Family::ols: return "OLS";
    case Family::gwr: return "GWR";
    case Family::mgwr: return "MGWR";
  }
  return "?";
}

Kernel kernel_from_string(std::string_view s) {
  if (s == "bisquare") return Kernel::bisquare;
  if (s == "gaussian") return Kernel::gaussian;
  if (s == "boxcar") return Kernel::boxcar;
  throw Error(ErrorCode::invalid_argument, "unknown kernel '" + std::string(s) + "'");
}

BandwidthMode bandwidth_mode_from_string(std::string_view s) {
  if (s == "adaptive") return BandwidthMode::adaptive;
  if (s == "fixed") return BandwidthMode::fixed;
  throw Error(ErrorCode::invalid_argument, "unknown bandwidth mode '" + std::string(s) + "'");
}

Family family_from_string(std::string_view s) {
  std::string u(s);
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (u == "OLS") return Family::ols;
  if (u == "GWR") return Family::gwr;
  if (u == "MGWR") return Family::mgwr;
  throw Error(ErrorCode::invalid_argument, "unknown model family '" + std::string(s) + "'");
}

void ModelSpec::validate(const dataset::GeoFeatureTable* table) const {
  auto fail = [](const std::string& msg, json details = json::object()) {
    throw Error(ErrorCode::invalid_argument, msg, std::move(details));
  };
  if (dependent.empty()) fail("dependent variable is required");
  if (family != Family::ols && independents.empty()) fail("GWR/MGWR need at least one independent variable");
  std::set<std::string> seen;
  for (const auto& v : independents) {
    if (v == dependent) fail("dependent variable listed as independent", {{"column", v}});
    if (!seen.insert(v).second) fail("independent listed twice", {{"column", v}});
  }
  if (convergence.tolerance <= 0.0 || convergence.max_iterations < 1) fail("invalid convergence settings");
  if (bandwidth && *bandwidth <= 0.0) fail("bandwidth must be positive");
  if (search_lo && search_hi && *search_lo >= *search_hi) fail("search range must satisfy lo < hi");
  if (table == nullptr) return;
  if (!table->has_column(dependent)) fail("unknown column '" + dependent + "'", {{"column", dependent}});
  for (const auto& v : independents) {
    if (!table->has_column(v)) fail("unknown column '" + v + "'", {{"column", v}});
  }
  if (bandwidth_mode == BandwidthMode::adaptive && family != Family::ols) {
    const double lo = static_cast<double>(parameter_count() + 1);
    const double hi = static_cast<double>(table->size());
    if ((search_lo && *search_lo < lo) || (search_hi && *search_hi > hi)) {
      fail("adaptive search bounds must lie within [p+2, n]", {{"min", lo}, {"max", hi}});
    }
    if (bandwidth && (*bandwidth < lo || *bandwidth > hi)) {
      fail("adaptive bandwidth must lie within [p+2, n]", {{"min", lo}, {"max", hi}});
    }
  }
}

json to_json(const ModelSpec& spec) {
  json j = {{"dependent", spec.dependent},
            {"independents", spec.independents},
            {"kernel", to_string(spec.kernel)},
            {"bandwidth_mode", to_string(spec.bandwidth_mode)},
            {"family", to_string(spec.family)},
            {"convergence", {{"tolerance", spec.convergence.tolerance}, {"max_iterations", spec.convergence.max_iterations}}}};
  j["search_lo"] = spec.search_lo ? json(*spec.search_lo) : json(nullptr);
  j["search_hi"] = spec.search_hi ? json(*spec.search_hi) : json(nullptr);
  j["bandwidth"] = spec.bandwidth ? json(*spec.bandwidth) : json(nullptr);
  return j;
}

ModelSpec spec_from_json(const json& j) {
  try {
    ModelSpec s;
    s.dependent = jsonio::require(j, "dependent").get<std::string>();
    s.independents = j.value("independents", std::vector<std::string>{});
    s.kernel = kernel_from_string(j.value("kernel", std::string("bisquare")));
    s.bandwidth_mode = bandwidth_mode_from_string(j.value("bandwidth_mode", std::string("adaptive")));
    s.family = family_from_string(j.value("family", std::string("MGWR")));
    auto opt = [&](const char* key) -> std::optional<double> {
      auto it = j.find(key);
      if (it == j.end() || it->is_null()) return std::nullopt;
      return it->get<double>();
    };
    s.search_lo = opt("search_lo");
    s.search_hi = opt("search_hi");
    s.bandwidth = opt("bandwidth");
    if (auto it = j.find("convergence"); it != j.end()) {
      s.convergence.tolerance = it->value("tolerance", 1e-5);
      s.convergence.max_iterations = it->value("max_iterations", 200);
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("malformed model spec: ") + e.what());
  }
}

Design standardize(const dataset::GeoFeatureTable& table, const ModelSpec& spec) {
  spec.validate(&table);
  std::vector<std::string> names{spec.dependent};
  names.insert(names.end(), spec.independents.begin(), spec.independents.end());
  const auto flagged = table.flagged_rows(names);
  Design d;
  {
    std::size_t f = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (f < flagged.size() && flagged[f] == i) {
        d.excluded_region_ids.push_back(table.region_ids[i]);
        ++f;
      } else {
        d.rows.push_back(i);
        d.region_ids.push_back(table.region_ids[i]);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(d.rows.size());
  const auto p = static_cast<Eigen::Index>(spec.independents.size());
  if (n == 0) throw Error(ErrorCode::empty_input, "no complete rows to fit");

  auto zscore = [&](const std::string& name, Eigen::Ref<Eigen::VectorXd> out) {
    const auto& col = table.column(name);
    double mean = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) mean += col[d.rows[static_cast<std::size_t>(r)]];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double v = col[d.rows[static_cast<std::size_t>(r)]] - mean;
      ss += v * v;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) throw Error(ErrorCode::degenerate_variable, "variable '" + name + "' is constant", {{"column", name}});
    for (Eigen::Index r = 0; r < n; ++r) out[r] = (col[d.rows[static_cast<std::size_t>(r)]] - mean) / sd;
    return StandardizationParams{name, mean, sd};
  };

  d.y.resize(n);
  d.target = zscore(spec.dependent, d.y);
  d.X.resize(n, p + 1);
  d.X.col(0).setOnes();
  d.surface_names.push_back("intercept");
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto& name = spec.independents[static_cast<std::size_t>(j)];
    d.covariates.push_back(zscore(name, d.X.col(j + 1)));
    d.surface_names.push_back(name);
  }
  return d;
}

std::size_t CalibratedModel::surface_index(const std::string& name) const {
  for (std::size_t j = 0; j < surface_names.size(); ++j) {
    if (surface_names[j] == name) return j;
  }
  throw Error(ErrorCode::not_found, "unknown surface '" + name + "'", {{"surface", name}});
}

double CalibratedModel::raw_coefficient(std::size_t i, std::size_t j) const {
  const auto r = static_cast<Eigen::Index>(i);
  if (j > 0) return coefficients(r, static_cast<Eigen::Index>(j)) * target.stddev / covariates[j - 1].stddev;
  double intercept = target.mean + target.stddev * coefficients(r, 0);
  for (std::size_t k = 1; k < surfaces(); ++k) intercept -= raw_coefficient(i, k) * covariates[k - 1].mean;
  return intercept;
}

namespace {

json params_json(const StandardizationParams& p) {
  return {{"name", p.name}, {"mean", jsonio::encode(p.mean)}, {"stddev", jsonio::encode(p.stddev)}};
}

StandardizationParams params_from(const json& j) {
  return {j.at("name").get<std::string>(), jsonio::decode_double(j.at("mean")), jsonio::decode_double(j.at("stddev"))};
}

}  // namespace

json to_json(const CalibratedModel& m) {
  json covs = json::array();
  for (const auto& c : m.covariates) covs.push_back(params_json(c));
  json trace = json::array();
  for (const auto& t : m.trace) {
    trace.push_back({{"iteration", t.iteration}, {"bandwidths", jsonio::encode(t.bandwidths)},
                     {"soc", jsonio::encode(t.soc)}, {"rss", jsonio::encode(t.rss)}});
  }
  return {{"family", to_string(m.family)},
          {"kernel", to_string(m.kernel)},
          {"bandwidth_mode", to_string(m.bandwidth_mode)},
          {"surface_names", m.surface_names},
          {"region_ids", m.region_ids},
          {"rows", m.rows},
          {"coefficients", jsonio::encode(m.coefficients)},
          {"local_se", jsonio::encode(m.local_se)},
          {"y", jsonio::encode(m.y)},
          {"fitted", jsonio::encode(m.fitted)},
          {"residuals", jsonio::encode(m.residuals)},
          {"hat_diag", jsonio::encode(m.hat_diag)},
          {"bandwidths", jsonio::encode(m.bandwidths)},
          {"enp_per_surface", jsonio::encode(m.enp_per_surface)},
          {"hat_trace", jsonio::encode(m.hat_trace)},
          {"sigma2", jsonio::encode(m.sigma2)},
          {"target", params_json(m.target)},
          {"covariates", covs},
          {"trace", trace},
          {"excluded_region_ids", m.excluded_region_ids},
          {"replay_deviation", jsonio::encode(m.replay_deviation)}};
}

CalibratedModel model_from_json(const json& j) {
  try {
    CalibratedModel m;
    m.family = family_from_string(j.at("family").get<std::string>());
    m.kernel = kernel_from_string(j.at("kernel").get<std::string>());
    m.bandwidth_mode = bandwidth_mode_from_string(j.at("bandwidth_mode").get<std::string>());
    m.surface_names = j.at("surface_names").get<std::vector<std::string>>();
    m.region_ids = j.at("region_ids").get<std::vector<std::string>>();
    m.rows = j.at("rows").get<std::vector<std::size_t>>();
    m.coefficients = jsonio::decode_matrix(j.at("coefficients"));
    m.local_se = jsonio::decode_matrix(j.at("local_se"));
    m.y = jsonio::decode_eigen_vector(j.at("y"));
    m.fitted = jsonio::decode_eigen_vector(j.at("fitted"));
    m.residuals = jsonio::decode_eigen_vector(j.at("residuals"));
    m.hat_diag = jsonio::decode_eigen_vector(j.at("hat_diag"));
    m.bandwidths = jsonio::decode_vector(j.at("bandwidths"));
    m.enp_per_surface = jsonio::decode_vector(j.at("enp_per_surface"));
    m.hat_trace = jsonio::decode_double(j.at("hat_trace"));
    m.sigma2 = jsonio::decode_double(j.at("sigma2"));
    m.target = params_from(j.at("target"));
    for (const auto& c : j.at("covariates")) m.covariates.push_back(params_from(c));
    for (const auto& t : j.at("trace")) {
      m.trace.push_back({t.at("iteration").get<int>(), jsonio::decode_vector(t.at("bandwidths")),
                         jsonio::decode_double(t.at("soc")), jsonio::decode_double(t.at("rss"))});
    }
    m.excluded_region_ids = j.at("excluded_region_ids").get<std::vector<std::string>>();
    m.replay_deviation = jsonio::decode_double(j.at("replay_deviation"));

    const auto n = static_cast<Eigen::Index>(m.region_ids.size());
    const auto k = static_cast<Eigen::Index>(m.surface_names.size());
    const bool shapes_ok = m.coefficients.rows() == n && m.coefficients.cols() == k && m.local_se.rows() == n &&
                           m.local_se.cols() == k && m.y.size() == n && m.fitted.size() == n &&
                           m.residuals.size() == n && m.hat_diag.size() == n &&
                           m.enp_per_surface.size() == static_cast<std::size_t>(k) &&
                           m.covariates.size() + 1 == static_cast<std::size_t>(k) && m.rows.size() == m.region_ids.size();
    if (!shapes_ok) {
      throw Error(ErrorCode::integrity, "calibrated model arrays have inconsistent shapes",
                  {{"reference", "calibration"},
                   {"regions", n},
                   {"surfaces", k},
                   {"coefficients", {m.coefficients.rows(), m.coefficients.cols()}},
                   {"local_se", {m.local_se.rows(), m.local_se.cols()}},
                   {"hat_diag", m.hat_diag.size()},
                   {"rows", m.rows.size()},
                   {"enp_per_surface", m.enp_per_surface.size()}});
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed calibrated model: ") + e.what());
  }
}

}  // namespace geolens::regression
