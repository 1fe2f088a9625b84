#include "geolens/screening/screening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"

namespace geolens::screening {

namespace {

std::vector<double> present(std::span<const double> column) {
  std::vector<double> v;
  v.reserve(column.size());
  for (double x : column) {
    if (!std::isnan(x)) v.push_back(x);
  }
  return v;
}

std::string row_name(std::span<const std::string> ids, std::size_t i) {
  return i < ids.size() ? ids[i] : std::to_string(i);
}

}  // namespace

std::string_view to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::log: return "log";
    case TransformKind::log1p: return "log1p";
    case TransformKind::sqrt: return "sqrt";
    case TransformKind::zscore: return "zscore";
  }
  return "?";
}

TransformKind transform_from_string(std::string_view name) {
  if (name == "log") return TransformKind::log;
  if (name == "log1p") return TransformKind::log1p;
  if (name == "sqrt") return TransformKind::sqrt;
  if (name == "zscore") return TransformKind::zscore;
  throw Error(ErrorCode::invalid_argument, "unknown transform '" + std::string(name) + "'");
}

std::string_view to_string(Zone zone) {
  switch (zone) {
    case Zone::diagonal: return "diagonal";
    case Zone::above: return "above";
    case Zone::below: return "below";
  }
  return "?";
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  // Two expansions of the same series; each converges fast on its side.
  if (lambda < 1.18) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double term = std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-18) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

FeatureProfile profile_feature(std::span<const double> column, std::size_t bins) {
  auto v = present(column);
  if (v.size() < 8) {
    throw Error(ErrorCode::invalid_argument, "profiling needs at least 8 non-missing values", {{"count", v.size()}});
  }
  if (bins == 0) throw Error(ErrorCode::invalid_argument, "bins must be positive");
  const double n = static_cast<double>(v.size());
  FeatureProfile p;
  p.count = v.size();
  p.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    const double d = x - p.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  if (m2 <= 0.0) throw Error(ErrorCode::degenerate_distribution, "column is constant (std = 0)");
  p.stddev = std::sqrt(m2 * n / (n - 1.0));
  p.skewness = std::sqrt(n * (n - 1.0)) / (n - 2.0) * (m3 / std::pow(m2, 1.5));

  std::sort(v.begin(), v.end());
  p.strictly_positive = v.front() > 0.0;
  p.non_negative = v.front() >= 0.0;

  const boost::math::normal_distribution<double> fitted(p.mean, p.stddev);
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = boost::math::cdf(fitted, v[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  p.ks_statistic = d;
  p.ks_p = kolmogorov_survival(std::sqrt(n) * d);

  const double lo = v.front(), hi = v.back();
  p.histogram.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) p.histogram.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  p.histogram.counts.assign(bins, 0);
  for (double x : v) {
    auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
    ++p.histogram.counts[std::min(b, bins - 1)];
  }

  if (std::abs(p.skewness) > 1.0) {
    if (p.strictly_positive) {
      p.suggested_transforms = {TransformKind::log, TransformKind::sqrt};
    } else if (p.skewness > 1.0 && p.non_negative) {
      p.suggested_transforms = {TransformKind::log1p};
    }
  }
  return p;
}

std::vector<double> apply_transform(std::span<const double> column, TransformKind kind,
                                    std::span<const std::string> region_ids) {
  std::vector<std::string> offending;
  auto check = [&](auto&& ok) {
    for (std::size_t i = 0; i < column.size(); ++i) {
      if (!std::isnan(column[i]) && !ok(column[i])) offending.push_back(row_name(region_ids, i));
    }
    if (!offending.empty()) {
      throw Error(ErrorCode::transform_domain, std::string(to_string(kind)) + " transform domain violated",
                  {{"transform", to_string(kind)}, {"regions", offending}});
    }
  };
  std::vector<double> out(column.begin(), column.end());
  switch (kind) {
    case TransformKind::log:
      check([](double x) { return x > 0.0; });
      for (double& x : out) x = std::log(x);
      break;
    case TransformKind::log1p:
      check([](double x) { return x > -1.0; });
      for (double& x : out) x = std::log1p(x);
      break;
    case TransformKind::sqrt:
      check([](double x) { return x >= 0.0; });
      for (double& x : out) x = std::sqrt(x);
      break;
    case TransformKind::zscore: {
      const auto v = present(column);
      if (v.empty()) throw Error(ErrorCode::degenerate_distribution, "column has no values");
      const double n = static_cast<double>(v.size());
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / n);
      if (sd == 0.0) throw Error(ErrorCode::degenerate_distribution, "zscore of a constant column");
      for (double& x : out) x = (x - mean) / sd;
      break;
    }
  }
  return out;
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y, double strong_threshold) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::invalid_argument, "pearson inputs differ in length", {{"x", x.size()}, {"y", y.size()}});
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isnan(x[i]) && !std::isnan(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  if (xs.size() < 3) throw Error(ErrorCode::invalid_argument, "pearson needs at least 3 paired values");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::undefined_correlation, "correlation with a constant input");
  CorrelationResult res;
  res.n = xs.size();
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = n - 2.0;
  if (std::abs(res.r) >= 1.0) {
    res.p = 0.0;
  } else if (dof > 0) {
    const double t = res.r * std::sqrt(dof / (1.0 - res.r * res.r));
    const boost::math::students_t_distribution<double> dist(dof);
    res.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  }
  res.flagged_strong = std::abs(res.r) >= strong_threshold;
  return res;
}

VifResult vif(const Eigen::MatrixXd& independents) {
  const auto n = independents.rows();
  const auto p = independents.cols();
  if (p < 2 || n <= p) {
    throw Error(ErrorCode::invalid_argument, "vif needs p >= 2 and n > p", {{"n", n}, {"p", p}});
  }
  VifResult out;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::MatrixXd design(n, p);
    design.col(0).setOnes();
    for (Eigen::Index c = 0, k = 1; c < p; ++c) {
      if (c != j) design.col(k++) = independents.col(c);
    }
    const Eigen::VectorXd target = independents.col(j);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    const Eigen::VectorXd beta = qr.solve(target);
    const double rss = (target - design * beta).squaredNorm();
    const double tss = (target.array() - target.mean()).square().sum();
    const double one_minus_r2 = tss > 0.0 ? rss / tss : 0.0;
    const bool collinear = one_minus_r2 < 1e-10;
    out.values.push_back(collinear ? std::numeric_limits<double>::infinity() : 1.0 / one_minus_r2);
    out.collinear.push_back(collinear);
    out.severe.push_back(out.values.back() > kSevereVif);
  }
  return out;
}

QuantileClasses classify_quantile(std::span<const double> values, int k) {
  if (k < 2) throw Error(ErrorCode::invalid_argument, "quantile classification needs k >= 2", {{"k", k}});
  auto sorted = present(values);
  QuantileClasses out;
  out.requested = k;
  out.classes.assign(values.size(), -1);
  if (sorted.empty()) {
    out.reduced = true;
    return out;
  }
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  // Upper bound of class c is the value at rank ceil((c+1) n / k) - 1;
  // duplicated bounds collapse, which keeps ties in the lower class.
  std::vector<double> uppers;
  for (int c = 0; c < k; ++c) {
    const std::size_t rank = (static_cast<std::size_t>(c + 1) * n + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k) - 1;
    const double u = sorted[rank];
    if (uppers.empty() || u > uppers.back()) uppers.push_back(u);
  }
  out.breaks.resize(uppers.size());
  for (std::size_t c = 0; c < uppers.size(); ++c) {
    out.breaks[c].upper = uppers[c];
    out.breaks[c].lower = std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) continue;
    const auto c = static_cast<std::size_t>(std::lower_bound(uppers.begin(), uppers.end(), values[i]) - uppers.begin());
    out.classes[i] = static_cast<int>(c);
    out.breaks[c].lower = std::min(out.breaks[c].lower, values[i]);
    ++out.breaks[c].count;
  }
  out.reduced = static_cast<int>(uppers.size()) < k;
  return out;
}

BivariateClasses classify_bivariate(std::span<const double> dep, std::span<const double> ind, int k) {
  if (dep.size() != ind.size()) throw Error(ErrorCode::invalid_argument, "bivariate inputs differ in length");
  if (k < 3) throw Error(ErrorCode::invalid_argument, "bivariate grid needs k >= 3", {{"k", k}});
  BivariateClasses out;
  out.k = k;
  out.dependent = classify_quantile(dep, k);
  out.independent = classify_quantile(ind, k);
  out.rows = out.dependent.classes;
  out.cols = out.independent.classes;
  out.zones.resize(dep.size());
  for (std::size_t i = 0; i < dep.size(); ++i) {
    const int r = out.rows[i], c = out.cols[i];
    out.zones[i] = r == c ? Zone::diagonal : (r > c ? Zone::above : Zone::below);
  }
  return out;
}

nlohmann::json to_json(const FeatureProfile& p) {
  std::vector<std::string> transforms;
  for (auto t : p.suggested_transforms) transforms.emplace_back(to_string(t));
  return {{"count", p.count},
          {"mean", jsonio::encode(p.mean)},
          {"stddev", jsonio::encode(p.stddev)},
          {"skewness", jsonio::encode(p.skewness)},
          {"ks_statistic", jsonio::encode(p.ks_statistic)},
          {"ks_p", jsonio::encode(p.ks_p)},
          {"strictly_positive", p.strictly_positive},
          {"non_negative", p.non_negative},
          {"histogram", {{"edges", jsonio::encode(p.histogram.edges)}, {"counts", p.histogram.counts}}},
          {"suggested_transforms", transforms}};
}

FeatureProfile profile_from_json(const nlohmann::json& j) {
  FeatureProfile p;
  p.count = j.at("count").get<std::size_t>();
  p.mean = jsonio::decode_double(j.at("mean"));
  p.stddev = jsonio::decode_double(j.at("stddev"));
  p.skewness = jsonio::decode_double(j.at("skewness"));
  p.ks_statistic = jsonio::decode_double(j.at("ks_statistic"));
  p.ks_p = jsonio::decode_double(j.at("ks_p"));
  p.strictly_positive = j.at("strictly_positive").get<bool>();
  p.non_negative = j.at("non_negative").get<bool>();
  p.histogram.edges = jsonio::decode_vector(j.at("histogram").at("edges"));
  p.histogram.counts = j.at("histogram").at("counts").get<std::vector<std::size_t>>();
  for (const auto& t : j.at("suggested_transforms")) p.suggested_transforms.push_back(transform_from_string(t.get<std::string>()));
  return p;
}

nlohmann::json to_json(const CorrelationResult& r) {
  return {{"x", r.x}, {"y", r.y}, {"r", jsonio::encode(r.r)}, {"p", jsonio::encode(r.p)}, {"n", r.n}, {"flagged_strong", r.flagged_strong}};
}

CorrelationResult correlation_from_json(const nlohmann::json& j) {
  CorrelationResult r;
  r.x = j.at("x").get<std::string>();
  r.y = j.at("y").get<std::string>();
  r.r = jsonio::decode_double(j.at("r"));
  r.p = jsonio::decode_double(j.at("p"));
  r.n = j.at("n").get<std::size_t>();
  r.flagged_strong = j.at("flagged_strong").get<bool>();
  return r;
}

nlohmann::json to_json(const VifResult& v) {
  return {{"values", jsonio::encode(v.values)}, {"severe", v.severe}, {"collinear", v.collinear}};
}

nlohmann::json to_json(const QuantileClasses& q) {
  nlohmann::json breaks = nlohmann::json::array();
  for (const auto& b : q.breaks) breaks.push_back({{"lower", jsonio::encode(b.lower)}, {"upper", jsonio::encode(b.upper)}, {"count", b.count}});
  return {{"classes", q.classes}, {"breaks", breaks}, {"requested", q.requested}, {"reduced", q.reduced}};
}

nlohmann::json to_json(const BivariateClasses& b) {
  std::vector<std::string> zones;
  for (auto z : b.zones) zones.emplace_back(to_string(z));
  return {{"k", b.k}, {"rows", b.rows}, {"cols", b.cols}, {"zones", zones},
          {"dependent", to_json(b.dependent)}, {"independent", to_json(b.independent)}};
}

}  // namespace geolens::screening
