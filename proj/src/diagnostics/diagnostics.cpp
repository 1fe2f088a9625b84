#include "geolens/diagnostics/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"
#include "geolens/dataset/neighbors.hpp"
#include "geolens/regression/criteria.hpp"
#include "geolens/regression/gwr.hpp"

namespace geolens::diagnostics {

using regression::CalibratedModel;
using regression::Family;

namespace {

constexpr double kNeutral = 1e-9;

double effective_parameters(const CalibratedModel& m) {
  return m.family == Family::ols ? static_cast<double>(m.surfaces()) : m.hat_trace;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

GlobalDiagnostics global_diagnostics(const CalibratedModel& m) {
  const auto n = m.n();
  const double k = effective_parameters(m);
  GlobalDiagnostics g;
  const double rss = m.rss();
  const double mean = m.y.mean();
  const double tss = (m.y.array() - mean).square().sum();
  g.aicc = regression::aicc(rss, n, k);
  g.r2 = tss > 0.0 ? 1.0 - rss / tss : std::numeric_limits<double>::quiet_NaN();
  g.adj_r2 = 1.0 - (1.0 - g.r2) * (static_cast<double>(n) - 1.0) / (static_cast<double>(n) - k);
  return g;
}

LocalR2 local_r2(const CalibratedModel& m, const dataset::GeoFeatureTable& table) {
  const auto n = m.n();
  LocalR2 out;
  out.values.resize(n);
  out.raw.resize(n);
  out.clamped.assign(n, false);
  out.undefined.assign(n, false);
  if (m.family == Family::ols) {
    const double r2 = global_diagnostics(m).r2;
    std::fill(out.values.begin(), out.values.end(), std::clamp(r2, 0.0, 1.0));
    std::fill(out.raw.begin(), out.raw.end(), r2);
    return out;
  }
  out.bandwidth = m.bandwidths.size() == 1 ? m.bandwidths.front() : median(m.bandwidths);

  std::vector<dataset::PlanarPoint> points;
  points.reserve(n);
  for (auto r : m.rows) points.push_back(table.centroids.at(r));
  const dataset::NeighborIndex index(points);
  const regression::LocalKernel k{m.kernel, m.bandwidth_mode};

#pragma omp parallel
  {
    std::vector<std::uint32_t> ids;
    std::vector<double> w;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      regression::local_support(index, i, out.bandwidth, k, ids, w);
      double sw = 0.0, swy = 0.0;
      for (std::size_t r = 0; r < ids.size(); ++r) {
        sw += w[r];
        swy += w[r] * m.y[ids[r]];
      }
      const double ybar = swy / sw;
      double tss = 0.0, rss = 0.0;
      for (std::size_t r = 0; r < ids.size(); ++r) {
        tss += w[r] * (m.y[ids[r]] - ybar) * (m.y[ids[r]] - ybar);
        rss += w[r] * m.residuals[ids[r]] * m.residuals[ids[r]];
      }
      if (!(tss > 0.0)) {
        out.undefined[i] = true;
        out.raw[i] = out.values[i] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const double v = (tss - rss) / tss;
      out.raw[i] = v;
      out.values[i] = std::clamp(v, 0.0, 1.0);
      out.clamped[i] = out.values[i] != v;
    }
  }
  return out;
}

CooksD cooks_d(const CalibratedModel& m) { return cooks_d(m, 4.0 / static_cast<double>(m.n())); }

CooksD cooks_d(const CalibratedModel& m, double threshold) {
  const auto n = m.n();
  const double k = effective_parameters(m);
  const double sigma = std::sqrt(m.sigma2);
  CooksD out;
  out.threshold = threshold;
  out.values.resize(n);
  out.outlier.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = m.hat_diag[static_cast<Eigen::Index>(i)];
    if (h >= 1.0) {
      out.values[i] = std::numeric_limits<double>::infinity();
      out.outlier[i] = true;
      continue;
    }
    const double e = m.residuals[static_cast<Eigen::Index>(i)] / (sigma * std::sqrt(1.0 - h));
    out.values[i] = e * e / k * h / (1.0 - h);
    out.outlier[i] = out.values[i] > threshold;
  }
  return out;
}

std::string_view to_string(ResidualLabel l) {
  switch (l) {
    case ResidualLabel::over: return "over";
    case ResidualLabel::under: return "under";
    case ResidualLabel::neutral: return "neutral";
  }
  return "neutral";
}

std::string_view to_string(ResidualConvention c) {
  return c == ResidualConvention::predicted_minus_observed ? "predicted_minus_observed" : "observed_minus_predicted";
}

ResidualConvention residual_convention_from_string(std::string_view s) {
  if (s == "predicted_minus_observed") return ResidualConvention::predicted_minus_observed;
  if (s == "observed_minus_predicted") return ResidualConvention::observed_minus_predicted;
  throw Error(ErrorCode::invalid_argument, "unknown residual convention '" + std::string(s) + "'");
}

StdResiduals std_residuals(const CalibratedModel& m, ResidualConvention convention) {
  const auto n = m.n();
  const double sign = convention == ResidualConvention::predicted_minus_observed ? -1.0 : 1.0;
  const double sigma = std::sqrt(m.sigma2);
  StdResiduals out;
  out.convention = convention;
  out.values.resize(n);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double denom = sigma * std::sqrt(std::max(0.0, 1.0 - m.hat_diag[ii]));
    const double v = denom > 0.0 ? sign * m.residuals[ii] / denom : 0.0;
    out.values[i] = v;
    out.labels[i] = v > kNeutral ? ResidualLabel::over : v < -kNeutral ? ResidualLabel::under : ResidualLabel::neutral;
  }
  return out;
}

MoransI morans_i(const std::vector<double>& values, const dataset::SpatialWeights& weights, int permutations,
                 std::uint64_t seed) {
  const auto n = values.size();
  if (weights.size() != n) {
    throw Error(ErrorCode::invalid_argument, "weights and values differ in size", {{"values", n}, {"weights", weights.size()}});
  }
  if (n < 3) throw Error(ErrorCode::undefined_statistic, "Moran's I needs at least 3 values");
  const auto w = weights.row_standardized();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  std::vector<double> z(n);
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = values[i] - mean;
    m2 += z[i] * z[i];
  }
  if (!(m2 > 0.0)) throw Error(ErrorCode::undefined_statistic, "Moran's I is undefined for constant values");
  const double s0 = w.total_weight();
  if (!(s0 > 0.0)) throw Error(ErrorCode::undefined_statistic, "Moran's I is undefined without neighbours");

  auto statistic = [&](const std::vector<double>& zz) {
    double cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double lag = 0.0;
      for (auto j : w.neighbors[i]) lag += zz[j];
      cross += w.weight(i) * zz[i] * lag;
    }
    return static_cast<double>(n) / s0 * cross / m2;
  };

  MoransI out;
  out.statistic = statistic(z);
  out.expected = -1.0 / (static_cast<double>(n) - 1.0);
  out.permutations = permutations;
  out.seed = seed;
  if (permutations <= 0) return out;

  std::vector<double> sims(static_cast<std::size_t>(permutations));
#pragma omp parallel
  {
    std::vector<double> zz;
#pragma omp for schedule(static)
    for (int k = 0; k < permutations; ++k) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(k)};
      std::mt19937_64 rng(seq);
      zz = z;
      std::shuffle(zz.begin(), zz.end(), rng);
      sims[static_cast<std::size_t>(k)] = statistic(zz);
    }
  }
  const auto larger = static_cast<int>(std::count_if(sims.begin(), sims.end(), [&](double s) { return s >= out.statistic; }));
  const int extreme = std::min(larger, permutations - larger);
  out.p_value = (extreme + 1.0) / (permutations + 1.0);
  return out;
}

Significance significance_mask(const CalibratedModel& m, double xi) {
  if (!(xi > 0.0 && xi < 1.0)) throw Error(ErrorCode::invalid_argument, "xi must lie in (0, 1)", {{"xi", xi}});
  const auto n = m.n();
  const auto surfaces = m.surfaces();
  Significance s;
  s.xi = xi;
  s.dof = static_cast<double>(n) - effective_parameters(m);
  if (!(s.dof > 0.0)) throw Error(ErrorCode::oversaturated_model, "no residual degrees of freedom", {{"dof", s.dof}});
  const boost::math::students_t dist(s.dof);
  s.t_values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(surfaces));
  s.mask.assign(surfaces, std::vector<bool>(n, false));
  s.zero_se.assign(surfaces, std::vector<bool>(n, false));
  for (std::size_t j = 0; j < surfaces; ++j) {
    const double enp = m.enp_per_surface.at(j);
    const double alpha = std::min(1.0, xi / enp);
    const double tc = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
    s.adjusted_alpha.push_back(alpha);
    s.t_critical.push_back(tc);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      const double se = m.local_se(ii, jj);
      if (se == 0.0) {
        s.t_values(ii, jj) = std::numeric_limits<double>::infinity();
        s.mask[j][i] = true;
        s.zero_se[j][i] = true;
        continue;
      }
      const double t = m.coefficients(ii, jj) / se;
      s.t_values(ii, jj) = t;
      s.mask[j][i] = std::abs(t) >= tc;
    }
  }
  return s;
}

DiagnosticsReport diagnose(const CalibratedModel& m, const dataset::GeoFeatureTable& table,
                           const dataset::SpatialWeights& weights, const Options& options) {
  DiagnosticsReport r;
  r.region_ids = m.region_ids;
  r.global = global_diagnostics(m);
  r.local_r2 = local_r2(m, table);
  r.cooks_d = cooks_d(m);
  r.std_residuals = std_residuals(m, options.convention);
  const auto sub = weights.induced(m.rows);
  const std::vector<double> residuals(m.residuals.data(), m.residuals.data() + m.residuals.size());
  r.morans_i_residuals = morans_i(residuals, sub, options.permutations, options.seed);
  r.significance = significance_mask(m, options.xi);
  return r;
}

nlohmann::json to_json(const DiagnosticsReport& r) {
  using namespace jsonio;
  nlohmann::json labels = nlohmann::json::array();
  for (auto l : r.std_residuals.labels) labels.push_back(to_string(l));
  return {
      {"region_ids", r.region_ids},
      {"global", {{"aicc", encode(r.global.aicc)}, {"r2", encode(r.global.r2)}, {"adj_r2", encode(r.global.adj_r2)}}},
      {"local_r2",
       {{"values", encode(r.local_r2.values)},
        {"raw", encode(r.local_r2.raw)},
        {"clamped", encode_bits(r.local_r2.clamped)},
        {"undefined", encode_bits(r.local_r2.undefined)},
        {"bandwidth", encode(r.local_r2.bandwidth)}}},
      {"cooks_d",
       {{"values", encode(r.cooks_d.values)}, {"outlier", encode_bits(r.cooks_d.outlier)}, {"threshold", encode(r.cooks_d.threshold)}}},
      {"std_residuals",
       {{"values", encode(r.std_residuals.values)}, {"labels", labels}, {"convention", to_string(r.std_residuals.convention)}}},
      {"morans_i_residuals",
       {{"statistic", encode(r.morans_i_residuals.statistic)},
        {"expected", encode(r.morans_i_residuals.expected)},
        {"p_value", encode(r.morans_i_residuals.p_value)},
        {"permutations", r.morans_i_residuals.permutations},
        {"seed", r.morans_i_residuals.seed}}},
      {"significance",
       {{"xi", encode(r.significance.xi)},
        {"adjusted_alpha", encode(r.significance.adjusted_alpha)},
        {"t_critical", encode(r.significance.t_critical)},
        {"dof", encode(r.significance.dof)},
        {"t_values", encode(r.significance.t_values)},
        {"mask", encode_mask(r.significance.mask)},
        {"zero_se", encode_mask(r.significance.zero_se)}}},
  };
}

DiagnosticsReport report_from_json(const nlohmann::json& j) {
  using namespace jsonio;
  DiagnosticsReport r;
  try {
    r.region_ids = require(j, "region_ids").get<std::vector<std::string>>();
    const auto& g = require(j, "global");
    r.global = {decode_double(require(g, "aicc")), decode_double(require(g, "r2")), decode_double(require(g, "adj_r2"))};
    const auto& lr = require(j, "local_r2");
    r.local_r2.values = decode_vector(require(lr, "values"));
    r.local_r2.raw = decode_vector(require(lr, "raw"));
    r.local_r2.clamped = decode_bits(require(lr, "clamped"));
    r.local_r2.undefined = decode_bits(require(lr, "undefined"));
    r.local_r2.bandwidth = decode_double(require(lr, "bandwidth"));
    const auto& cd = require(j, "cooks_d");
    r.cooks_d.values = decode_vector(require(cd, "values"));
    r.cooks_d.outlier = decode_bits(require(cd, "outlier"));
    r.cooks_d.threshold = decode_double(require(cd, "threshold"));
    const auto& sr = require(j, "std_residuals");
    r.std_residuals.values = decode_vector(require(sr, "values"));
    r.std_residuals.convention = residual_convention_from_string(require(sr, "convention").get<std::string>());
    for (const auto& l : require(sr, "labels")) {
      const auto s = l.get<std::string>();
      if (s == "over") r.std_residuals.labels.push_back(ResidualLabel::over);
      else if (s == "under") r.std_residuals.labels.push_back(ResidualLabel::under);
      else if (s == "neutral") r.std_residuals.labels.push_back(ResidualLabel::neutral);
      else throw Error(ErrorCode::parse, "unknown residual label '" + s + "'");
    }
    const auto& mi = require(j, "morans_i_residuals");
    r.morans_i_residuals.statistic = decode_double(require(mi, "statistic"));
    r.morans_i_residuals.expected = decode_double(require(mi, "expected"));
    r.morans_i_residuals.p_value = decode_double(require(mi, "p_value"));
    r.morans_i_residuals.permutations = require(mi, "permutations").get<int>();
    r.morans_i_residuals.seed = require(mi, "seed").get<std::uint64_t>();
    const auto& sg = require(j, "significance");
    r.significance.xi = decode_double(require(sg, "xi"));
    r.significance.adjusted_alpha = decode_vector(require(sg, "adjusted_alpha"));
    r.significance.t_critical = decode_vector(require(sg, "t_critical"));
    r.significance.dof = decode_double(require(sg, "dof"));
    r.significance.t_values = decode_matrix(require(sg, "t_values"));
    r.significance.mask = decode_mask(require(sg, "mask"));
    r.significance.zero_se = decode_mask(require(sg, "zero_se"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed diagnostics: ") + e.what());
  }
  const auto n = r.region_ids.size();
  auto check = [&](std::size_t size, const char* what) {
    if (size != n) throw Error(ErrorCode::integrity, std::string("diagnostics array '") + what + "' has the wrong length");
  };
  check(r.local_r2.values.size(), "local_r2");
  check(r.cooks_d.values.size(), "cooks_d");
  check(r.std_residuals.values.size(), "std_residuals");
  check(r.std_residuals.labels.size(), "labels");
  for (const auto& row : r.significance.mask) check(row.size(), "mask");
  return r;
}

}  // namespace geolens::diagnostics
