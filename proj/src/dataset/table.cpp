#include "geolens/dataset/table.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geolens/common/digest.hpp"
#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"

namespace geolens::dataset {

namespace {

constexpr double kEarthRadiusKm = 6371.0088;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

nlohmann::json ring_to_json(const Ring& ring) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : ring) out.push_back({p.lon, p.lat});
  return out;
}

Ring ring_from_json(const nlohmann::json& j) {
  Ring ring;
  ring.reserve(j.size());
  for (const auto& p : j) ring.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return ring;
}

}  // namespace

PlanarPoint Projection::project(const LonLat& p) const {
  if (planar_passthrough) return {p.lon, p.lat};
  const double phi0 = radians(origin.lat);
  const double phi = radians(p.lat);
  const double dlambda = radians(p.lon - origin.lon);
  const double cos_c = std::clamp(std::sin(phi0) * std::sin(phi) + std::cos(phi0) * std::cos(phi) * std::cos(dlambda), -1.0, 1.0);
  const double c = std::acos(cos_c);
  const double k = c < 1e-12 ? 1.0 : c / std::sin(c);
  return {kEarthRadiusKm * k * std::cos(phi) * std::sin(dlambda),
          kEarthRadiusKm * k * (std::cos(phi0) * std::sin(phi) - std::sin(phi0) * std::cos(phi) * std::cos(dlambda))};
}

const std::vector<double>& GeoFeatureTable::column(const std::string& name) const {
  auto it = columns.find(name);
  if (it == columns.end()) throw Error(ErrorCode::not_found, "unknown column '" + name + "'", {{"column", name}});
  return it->second;
}

std::size_t GeoFeatureTable::index_of(const std::string& region_id) const {
  for (std::size_t i = 0; i < region_ids.size(); ++i) {
    if (region_ids[i] == region_id) return i;
  }
  throw Error(ErrorCode::not_found, "unknown region '" + region_id + "'", {{"region_id", region_id}});
}

std::vector<std::size_t> GeoFeatureTable::flagged_rows(const std::vector<std::string>& names) const {
  std::vector<const std::vector<double>*> cols;
  if (names.empty()) {
    for (const auto& [_, v] : columns) cols.push_back(&v);
  } else {
    for (const auto& name : names) cols.push_back(&column(name));
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    for (const auto* c : cols) {
      if (std::isnan((*c)[i])) {
        rows.push_back(i);
        break;
      }
    }
  }
  return rows;
}

GeoFeatureTable GeoFeatureTable::with_column(const std::string& name, std::vector<double> values) const {
  if (values.size() != size()) {
    throw Error(ErrorCode::invalid_argument, "column '" + name + "' has the wrong length",
                {{"expected", size()}, {"actual", values.size()}});
  }
  GeoFeatureTable out = *this;
  out.columns[name] = std::move(values);
  return out;
}

GeoFeatureTable GeoFeatureTable::subset(const std::vector<std::size_t>& rows) const {
  GeoFeatureTable out;
  out.projection = projection;
  for (const auto& [name, _] : columns) out.columns[name].reserve(rows.size());
  for (std::size_t r : rows) {
    out.region_ids.push_back(region_ids.at(r));
    out.geometries.push_back(geometries[r]);
    out.geo_centroids.push_back(geo_centroids[r]);
    out.centroids.push_back(centroids[r]);
    out.metadata.push_back(metadata[r]);
    for (const auto& [name, v] : columns) out.columns[name].push_back(v[r]);
  }
  return out;
}

nlohmann::json to_json(const GeoFeatureTable& table) {
  nlohmann::json geoms = nlohmann::json::array();
  for (const auto& g : table.geometries) {
    nlohmann::json polys = nlohmann::json::array();
    for (const auto& poly : g.polygons) {
      nlohmann::json rings = nlohmann::json::array();
      rings.push_back(ring_to_json(poly.exterior));
      for (const auto& h : poly.holes) rings.push_back(ring_to_json(h));
      polys.push_back(std::move(rings));
    }
    geoms.push_back(std::move(polys));
  }
  nlohmann::json cols = nlohmann::json::object();
  for (const auto& [name, v] : table.columns) cols[name] = jsonio::encode(v);
  nlohmann::json centroids = nlohmann::json::array();
  for (const auto& c : table.centroids) centroids.push_back({c.x, c.y});
  nlohmann::json geo_centroids = nlohmann::json::array();
  for (const auto& c : table.geo_centroids) geo_centroids.push_back({c.lon, c.lat});
  return {{"region_ids", table.region_ids},
          {"geometries", std::move(geoms)},
          {"columns", std::move(cols)},
          {"metadata", table.metadata},
          {"centroids", std::move(centroids)},
          {"geo_centroids", std::move(geo_centroids)},
          {"projection",
           {{"planar", table.projection.planar_passthrough},
            {"origin", {table.projection.origin.lon, table.projection.origin.lat}}}}};
}

GeoFeatureTable table_from_json(const nlohmann::json& j) {
  try {
    GeoFeatureTable t;
    t.region_ids = jsonio::require(j, "region_ids").get<std::vector<std::string>>();
    for (const auto& g : jsonio::require(j, "geometries")) {
      Geometry geom;
      for (const auto& rings : g) {
        Polygon poly;
        poly.exterior = ring_from_json(rings.at(0));
        for (std::size_t r = 1; r < rings.size(); ++r) poly.holes.push_back(ring_from_json(rings[r]));
        geom.polygons.push_back(std::move(poly));
      }
      t.geometries.push_back(std::move(geom));
    }
    for (const auto& [name, v] : jsonio::require(j, "columns").items()) t.columns[name] = jsonio::decode_vector(v);
    for (const auto& m : jsonio::require(j, "metadata")) t.metadata.push_back(m);
    for (const auto& c : jsonio::require(j, "centroids")) t.centroids.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    for (const auto& c : jsonio::require(j, "geo_centroids")) t.geo_centroids.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    const auto& proj = jsonio::require(j, "projection");
    t.projection.planar_passthrough = jsonio::require(proj, "planar").get<bool>();
    const auto& origin = jsonio::require(proj, "origin");
    t.projection.origin = {origin.at(0).get<double>(), origin.at(1).get<double>()};

    const auto n = t.region_ids.size();
    if (t.geometries.size() != n || t.metadata.size() != n || t.centroids.size() != n || t.geo_centroids.size() != n) {
      throw Error(ErrorCode::integrity, "table arrays disagree on region count");
    }
    for (const auto& [name, v] : t.columns) {
      if (v.size() != n) throw Error(ErrorCode::integrity, "column '" + name + "' has the wrong length");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed table: ") + e.what());
  }
}

std::string fingerprint(const GeoFeatureTable& table) {
  return sha256_hex(jsonio::canonical_dump(to_json(table)));
}

}  // namespace geolens::dataset
