#include "geolens/patterns/clusters.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"
#include "geolens/patterns/leiden.hpp"

namespace geolens::patterns {

std::string_view to_string(Sign s) { return s == Sign::positive ? "positive" : "negative"; }

SignSplit split_significant(std::span<const double> surface, const std::vector<bool>& mask) {
  if (mask.size() != surface.size()) {
    throw Error(ErrorCode::invalid_argument, "mask and surface differ in length",
                {{"mask", mask.size()}, {"surface", surface.size()}});
  }
  SignSplit s;
  for (std::size_t i = 0; i < surface.size(); ++i) {
    if (!mask[i]) continue;
    if (surface[i] < 0.0) {
      s.negative.push_back(i);
    } else {
      s.positive.push_back(i);
      if (surface[i] == 0.0) s.zeros.push_back(i);
    }
  }
  return s;
}

const Cluster* ClusterSet::find(const std::string& id) const {
  for (const auto* list : {&positive_clusters, &negative_clusters}) {
    for (const auto& c : *list) {
      if (c.id == id) return &c;
    }
  }
  return nullptr;
}

double data_scale_coefficient(const regression::CalibratedModel& m, std::size_t row, std::size_t surface) {
  const double b = m.coefficients(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(surface));
  if (surface == 0) return b * m.target.stddev;
  return b * m.target.stddev / m.covariates.at(surface - 1).stddev;
}

namespace {

std::string default_label(std::size_t k, const dataset::LonLat& c) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "Cluster %zu near (%.2f, %.2f)", k, c.lat, c.lon);
  return buf;
}

void build_group(const std::string& surface, Sign sign, const std::vector<std::size_t>& nodes, std::size_t j,
                 const regression::CalibratedModel& m, const dataset::SpatialWeights& sub_rows,
                 const dataset::GeoFeatureTable& table, const ClusterParams& params, std::vector<Cluster>& out,
                 std::vector<std::string>& isolated) {
  if (nodes.empty()) return;
  const auto graph = sub_rows.induced(nodes);
  LeidenOptions lo;
  lo.resolution = params.resolution;
  lo.seed = params.seed;
  const auto communities = leiden_communities(graph, lo);
  for (const auto& comm : communities) {
    if (comm.size() < params.min_size) {
      for (auto v : comm) isolated.push_back(m.region_ids[nodes[v]]);
      continue;
    }
    Cluster c;
    c.sign = sign;
    c.id = surface + "/" + std::string(to_string(sign)) + "/" + std::to_string(out.size() + 1);
    double lon = 0.0, lat = 0.0, mean = 0.0, mean_std = 0.0;
    c.extent_min = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    c.extent_max = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (auto v : comm) {
      const auto row = nodes[v];
      c.rows.push_back(row);
      c.region_ids.push_back(m.region_ids[row]);
      const auto& g = table.geo_centroids.at(m.rows[row]);
      lon += g.lon;
      lat += g.lat;
      c.extent_min = {std::min(c.extent_min.lon, g.lon), std::min(c.extent_min.lat, g.lat)};
      c.extent_max = {std::max(c.extent_max.lon, g.lon), std::max(c.extent_max.lat, g.lat)};
      mean += data_scale_coefficient(m, row, j);
      mean_std += m.coefficients(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j));
    }
    const double k = static_cast<double>(comm.size());
    c.centroid = {lon / k, lat / k};
    c.mean_coefficient = mean / k;
    c.mean_standardized = mean_std / k;
    c.location_identifier = default_label(out.size() + 1, c.centroid);
    out.push_back(std::move(c));
  }
}

}  // namespace

ClusterSet detect_clusters(const std::string& surface, const regression::CalibratedModel& m, const std::vector<bool>& mask,
                           const dataset::SpatialWeights& weights, const dataset::GeoFeatureTable& table,
                           const ClusterParams& params) {
  const auto j = m.surface_index(surface);
  const auto n = m.n();
  std::vector<double> beta(n);
  for (std::size_t i = 0; i < n; ++i) beta[i] = m.coefficients(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  const auto split = split_significant(beta, mask);
  const auto sub = weights.induced(m.rows);

  ClusterSet set;
  set.surface = surface;
  for (auto z : split.zeros) set.zero_coefficient.push_back(m.region_ids[z]);
  build_group(surface, Sign::positive, split.positive, j, m, sub, table, params, set.positive_clusters, set.isolated);
  build_group(surface, Sign::negative, split.negative, j, m, sub, table, params, set.negative_clusters, set.isolated);
  std::sort(set.isolated.begin(), set.isolated.end());
  return set;
}

namespace {

nlohmann::json cluster_json(const Cluster& c) {
  using jsonio::encode;
  return {{"id", c.id},
          {"sign", to_string(c.sign)},
          {"region_ids", c.region_ids},
          {"rows", c.rows},
          {"size", c.size()},
          {"mean_coefficient", encode(c.mean_coefficient)},
          {"mean_standardized", encode(c.mean_standardized)},
          {"centroid", {encode(c.centroid.lon), encode(c.centroid.lat)}},
          {"extent", {encode(c.extent_min.lon), encode(c.extent_min.lat), encode(c.extent_max.lon), encode(c.extent_max.lat)}},
          {"location_identifier", c.location_identifier}};
}

Cluster cluster_from(const nlohmann::json& j) {
  using jsonio::decode_double;
  using jsonio::require;
  Cluster c;
  c.id = require(j, "id").get<std::string>();
  const auto sign = require(j, "sign").get<std::string>();
  if (sign != "positive" && sign != "negative") throw Error(ErrorCode::parse, "unknown cluster sign '" + sign + "'");
  c.sign = sign == "positive" ? Sign::positive : Sign::negative;
  c.region_ids = require(j, "region_ids").get<std::vector<std::string>>();
  c.rows = require(j, "rows").get<std::vector<std::size_t>>();
  c.mean_coefficient = decode_double(require(j, "mean_coefficient"));
  c.mean_standardized = decode_double(require(j, "mean_standardized"));
  const auto& ce = require(j, "centroid");
  c.centroid = {decode_double(ce.at(0)), decode_double(ce.at(1))};
  const auto& ex = require(j, "extent");
  c.extent_min = {decode_double(ex.at(0)), decode_double(ex.at(1))};
  c.extent_max = {decode_double(ex.at(2)), decode_double(ex.at(3))};
  c.location_identifier = require(j, "location_identifier").get<std::string>();
  if (c.rows.size() != c.region_ids.size()) throw Error(ErrorCode::integrity, "cluster '" + c.id + "' rows and ids disagree");
  return c;
}

}  // namespace

nlohmann::json to_json(const ClusterSet& c) {
  nlohmann::json pos = nlohmann::json::array(), neg = nlohmann::json::array();
  for (const auto& k : c.positive_clusters) pos.push_back(cluster_json(k));
  for (const auto& k : c.negative_clusters) neg.push_back(cluster_json(k));
  return {{"surface", c.surface},
          {"positive_clusters", pos},
          {"negative_clusters", neg},
          {"isolated", c.isolated},
          {"zero_coefficient", c.zero_coefficient}};
}

ClusterSet cluster_set_from_json(const nlohmann::json& j) {
  using jsonio::require;
  try {
    ClusterSet c;
    c.surface = require(j, "surface").get<std::string>();
    for (const auto& k : require(j, "positive_clusters")) c.positive_clusters.push_back(cluster_from(k));
    for (const auto& k : require(j, "negative_clusters")) c.negative_clusters.push_back(cluster_from(k));
    c.isolated = require(j, "isolated").get<std::vector<std::string>>();
    c.zero_coefficient = require(j, "zero_coefficient").get<std::vector<std::string>>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed cluster set: ") + e.what());
  }
}

}  // namespace geolens::patterns
