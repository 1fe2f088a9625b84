#include "geolens/dataset/geojson.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "geolens/common/error.hpp"
#include "geolens/dataset/geometry.hpp"

namespace geolens::dataset {

namespace {

using nlohmann::json;

Ring parse_ring(const json& j, const std::string& feature) {
  if (!j.is_array()) throw Error(ErrorCode::unsupported_geometry, "ring is not an array", {{"feature", feature}});
  Ring ring;
  ring.reserve(j.size());
  for (const auto& p : j) {
    if (!p.is_array() || p.size() < 2 || !p[0].is_number() || !p[1].is_number()) {
      throw Error(ErrorCode::unsupported_geometry, "invalid position", {{"feature", feature}});
    }
    ring.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
  return ring;
}

Polygon parse_polygon(const json& rings, const std::string& feature) {
  if (!rings.is_array() || rings.empty()) {
    throw Error(ErrorCode::unsupported_geometry, "polygon without rings", {{"feature", feature}});
  }
  Polygon poly;
  poly.exterior = parse_ring(rings[0], feature);
  for (std::size_t r = 1; r < rings.size(); ++r) poly.holes.push_back(parse_ring(rings[r], feature));
  return poly;
}

Geometry parse_geometry(const json& g, const std::string& feature) {
  if (!g.is_object()) throw Error(ErrorCode::unsupported_geometry, "feature has no geometry", {{"feature", feature}});
  const auto type = g.value("type", std::string{});
  const auto coords = g.find("coordinates");
  if (coords == g.end()) throw Error(ErrorCode::unsupported_geometry, "geometry without coordinates", {{"feature", feature}});
  Geometry geom;
  if (type == "Polygon") {
    geom.polygons.push_back(parse_polygon(*coords, feature));
  } else if (type == "MultiPolygon") {
    for (const auto& p : *coords) geom.polygons.push_back(parse_polygon(p, feature));
  } else {
    throw Error(ErrorCode::unsupported_geometry, "unsupported geometry type '" + type + "' in feature " + feature,
                {{"feature", feature}, {"type", type}});
  }
  std::set<std::pair<double, double>> distinct;
  for (const auto& poly : geom.polygons) {
    for (const auto& p : poly.exterior) distinct.emplace(p.lon, p.lat);
  }
  if (geom.polygons.empty() || distinct.size() < 3) {
    throw Error(ErrorCode::unsupported_geometry, "degenerate geometry in feature " + feature, {{"feature", feature}});
  }
  return geom;
}

std::string id_from_json(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  return {};
}

}  // namespace

GeoFeatureTable load_geojson(std::string_view bytes, const LoadOptions& options) {
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("malformed GeoJSON: ") + e.what(), {{"byte_offset", e.byte}});
  }
  if (!doc.is_object() || doc.value("type", std::string{}) != "FeatureCollection") {
    throw Error(ErrorCode::parse, "document is not a FeatureCollection", {{"byte_offset", 0}});
  }
  const auto features = doc.find("features");
  if (features == doc.end() || !features->is_array()) {
    throw Error(ErrorCode::parse, "FeatureCollection has no features array", {{"byte_offset", 0}});
  }
  if (features->empty()) throw Error(ErrorCode::empty_input, "FeatureCollection has zero features");

  const std::size_t n = features->size();
  GeoFeatureTable table;
  table.projection.planar_passthrough = options.planar;

  // A property becomes a numeric column iff every non-null occurrence is a number.
  std::map<std::string, bool> numeric;
  std::vector<json> props(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = (*features)[i];
    const std::string label = std::to_string(i);
    if (!f.is_object() || f.value("type", std::string{}) != "Feature") {
      throw Error(ErrorCode::parse, "entry " + label + " is not a Feature", {{"feature", label}});
    }
    table.geometries.push_back(parse_geometry(f.contains("geometry") ? f["geometry"] : json{}, label));
    props[i] = f.contains("properties") && f["properties"].is_object() ? f["properties"] : json::object();
    for (const auto& [key, value] : props[i].items()) {
      if (value.is_null()) {
        numeric.try_emplace(key, true);
        continue;
      }
      const bool is_num = value.is_number();
      auto [it, inserted] = numeric.try_emplace(key, is_num);
      if (!inserted) it->second = it->second && is_num;
    }
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id;
    if (options.id_key) {
      auto it = props[i].find(*options.id_key);
      if (it == props[i].end() || (id = id_from_json(*it)).empty()) {
        throw Error(ErrorCode::invalid_argument, "feature " + std::to_string(i) + " lacks id property '" + *options.id_key + "'",
                    {{"feature", i}, {"id_key", *options.id_key}});
      }
    } else {
      id = std::to_string(i);
    }
    if (!ids.insert(id).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate region id '" + id + "'", {{"region_id", id}});
    }
    table.region_ids.push_back(std::move(id));

    json meta = json::object();
    for (const auto& [key, value] : props[i].items()) {
      if (!numeric[key]) meta[key] = value;
    }
    table.metadata.push_back(std::move(meta));
  }
  for (const auto& [key, is_num] : numeric) {
    if (!is_num) continue;
    std::vector<double> col(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i) {
      auto it = props[i].find(key);
      if (it != props[i].end() && it->is_number()) col[i] = it->get<double>();
    }
    table.columns.emplace(key, std::move(col));
  }

  double min_lon = std::numeric_limits<double>::infinity(), max_lon = -min_lon;
  double min_lat = min_lon, max_lat = -min_lon;
  for (const auto& g : table.geometries) {
    for (const auto& poly : g.polygons) {
      for (const auto& p : poly.exterior) {
        min_lon = std::min(min_lon, p.lon);
        max_lon = std::max(max_lon, p.lon);
        min_lat = std::min(min_lat, p.lat);
        max_lat = std::max(max_lat, p.lat);
      }
    }
  }
  table.projection.origin = {0.5 * (min_lon + max_lon), 0.5 * (min_lat + max_lat)};
  for (const auto& g : table.geometries) {
    const LonLat c = representative_centroid(g);
    table.geo_centroids.push_back(c);
    table.centroids.push_back(table.projection.project(c));
  }
  return table;
}

std::string to_geojson(const GeoFeatureTable& table) {
  json features = json::array();
  for (std::size_t i = 0; i < table.size(); ++i) {
    json polys = json::array();
    for (const auto& poly : table.geometries[i].polygons) {
      json rings = json::array();
      auto ring_json = [](const Ring& ring) {
        json r = json::array();
        for (const auto& p : ring) r.push_back({p.lon, p.lat});
        if (!ring.empty()) r.push_back({ring.front().lon, ring.front().lat});
        return r;
      };
      rings.push_back(ring_json(poly.exterior));
      for (const auto& h : poly.holes) rings.push_back(ring_json(h));
      polys.push_back(std::move(rings));
    }
    json props = table.metadata[i];
    props["region_id"] = table.region_ids[i];
    for (const auto& [name, v] : table.columns) props[name] = std::isnan(v[i]) ? json(nullptr) : json(v[i]);
    json geometry = polys.size() == 1 ? json{{"type", "Polygon"}, {"coordinates", polys[0]}}
                                      : json{{"type", "MultiPolygon"}, {"coordinates", polys}};
    features.push_back({{"type", "Feature"}, {"geometry", std::move(geometry)}, {"properties", std::move(props)}});
  }
  return json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump();
}

}  // namespace geolens::dataset
