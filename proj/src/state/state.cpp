#include "geolens/state/state.hpp"

#include <algorithm>
#include <set>

#include "geolens/common/digest.hpp"
#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"

namespace geolens::state {

using nlohmann::json;

json to_json(const Settings& s) {
  return {{"xi", jsonio::encode(s.xi)},
          {"permutations", s.permutations},
          {"residual_convention", diagnostics::to_string(s.convention)},
          {"local_r2_threshold", jsonio::encode(s.local_r2_threshold)},
          {"correlation_threshold", jsonio::encode(s.correlation_threshold)},
          {"cluster_resolution", jsonio::encode(s.cluster_resolution)},
          {"cluster_min_size", s.cluster_min_size},
          {"rng_seeds", {{"morans_i", s.moran_seed}, {"leiden", s.leiden_seed}}}};
}

Settings settings_from_json(const json& j) {
  using jsonio::require;
  Settings s;
  s.xi = jsonio::decode_double(require(j, "xi"));
  s.permutations = require(j, "permutations").get<int>();
  s.convention = diagnostics::residual_convention_from_string(require(j, "residual_convention").get<std::string>());
  s.local_r2_threshold = jsonio::decode_double(require(j, "local_r2_threshold"));
  s.correlation_threshold = jsonio::decode_double(require(j, "correlation_threshold"));
  s.cluster_resolution = jsonio::decode_double(require(j, "cluster_resolution"));
  s.cluster_min_size = require(j, "cluster_min_size").get<std::size_t>();
  const auto& seeds = require(j, "rng_seeds");
  s.moran_seed = require(seeds, "morans_i").get<std::uint64_t>();
  s.leiden_seed = require(seeds, "leiden").get<std::uint64_t>();
  return s;
}

namespace {

[[noreturn]] void broken(const std::string& what, const std::string& reference) {
  throw Error(ErrorCode::integrity, what + ": " + reference, {{"reference", reference}});
}

void check_clusters(const std::string& key, const patterns::ClusterSet& set, const regression::CalibratedModel& model) {
  if (set.surface != key) broken("cluster set stored under the wrong surface", "clusters/" + key);
  if (std::find(model.surface_names.begin(), model.surface_names.end(), key) == model.surface_names.end()) {
    broken("cluster set for an unknown surface", "clusters/" + key);
  }
  const std::set<std::string> known(model.region_ids.begin(), model.region_ids.end());
  std::set<std::string> seen_regions, seen_ids;
  auto claim = [&](const std::string& region, const std::string& where) {
    if (!known.contains(region)) broken("unknown region in " + where, where + "/" + region);
    if (!seen_regions.insert(region).second) broken("region listed twice in " + where, where + "/" + region);
  };
  for (auto sign : {patterns::Sign::positive, patterns::Sign::negative}) {
    const auto& list = sign == patterns::Sign::positive ? set.positive_clusters : set.negative_clusters;
    const auto prefix = key + "/" + std::string(patterns::to_string(sign)) + "/";
    for (const auto& c : list) {
      if (c.sign != sign || c.id.rfind(prefix, 0) != 0 || c.id.size() == prefix.size()) {
        broken("cluster id does not match its surface and sign", c.id);
      }
      if (!seen_ids.insert(c.id).second) broken("duplicate cluster id", c.id);
      if (c.region_ids.empty() || c.rows.size() != c.region_ids.size()) broken("cluster membership is inconsistent", c.id);
      for (std::size_t k = 0; k < c.region_ids.size(); ++k) {
        claim(c.region_ids[k], c.id);
        if (c.rows[k] >= model.region_ids.size() || model.region_ids[c.rows[k]] != c.region_ids[k]) {
          broken("cluster row does not match its region", c.id + "/" + c.region_ids[k]);
        }
      }
    }
  }
  for (const auto& r : set.isolated) claim(r, "clusters/" + key + "/isolated");
  for (const auto& r : set.zero_coefficient) claim(r, "clusters/" + key + "/zero_coefficient");
}

bool known_diagnostic_paragraph(const std::string& kind, const std::string& id) {
  static const std::map<std::string, std::set<std::string>> ids = {
      {"local_r2", {"local_r2/high", "local_r2/low"}},
      {"cooks_d", {"cooks_d/outliers"}},
      {"std_residual", {"std_residual/over", "std_residual/under"}}};
  const auto it = ids.find(kind);
  return it != ids.end() && it->second.contains(id);
}

void check_edits(const std::string& key, const narrative::Edits& edits, const AnalyticalState& s) {
  const auto colon = key.find(':');
  const auto family = key.substr(0, colon);
  const auto subject = colon == std::string::npos ? std::string{} : key.substr(colon + 1);
  if (family == "diagnostic") {
    if (!s.diagnostics) broken("narrative edits without diagnostics", "narrative_edits/" + key);
    for (const auto& [id, label] : edits) {
      if (!known_diagnostic_paragraph(subject, id)) broken("edit names an unknown paragraph", "narrative_edits/" + key + "/" + id);
    }
    return;
  }
  if (family != "coefficient" || !s.model) broken("narrative edits for an unknown narrative", "narrative_edits/" + key);
  const auto& names = s.model->surface_names;
  if (std::find(names.begin(), names.end(), subject) == names.end()) {
    broken("narrative edits for an unknown surface", "narrative_edits/" + key);
  }
  const auto it = s.clusters.find(subject);
  for (const auto& [id, label] : edits) {
    const auto ref = "narrative_edits/" + key + "/" + id;
    if (id.rfind("coef:", 0) != 0) broken("edit names an unknown paragraph", ref);
    const auto cluster_id = id.substr(5);
    if (it == s.clusters.end() || !it->second.find(cluster_id)) broken("edit names an unknown cluster", ref);
  }
}

json to_json_impl(const AnalyticalState& s, bool embed) {
  json j = {{"schema_version", s.schema_version},
            {"dataset", {{"fingerprint", s.dataset_fingerprint}}},
            {"settings", to_json(s.settings)},
            {"clusters", json::object()},
            {"narrative_edits", json::object()},
            {"assets", json::array()},
            {"corpus_cache_keys", s.corpus_cache_keys}};
  if (embed && s.dataset) j["dataset"]["table"] = dataset::to_json(*s.dataset);
  if (s.spec) j["spec"] = regression::to_json(*s.spec);
  if (s.model) j["calibration"] = regression::to_json(*s.model);
  if (s.diagnostics) j["diagnostics"] = diagnostics::to_json(*s.diagnostics);
  for (const auto& [k, v] : s.clusters) j["clusters"][k] = patterns::to_json(v);
  for (const auto& [k, v] : s.narrative_edits) j["narrative_edits"][k] = v;
  if (s.report) j["report"] = report::to_json(*s.report);
  for (const auto& [k, a] : s.assets) j["assets"].push_back(report::to_json(a));
  return j;
}

}  // namespace

void validate(const AnalyticalState& s) {
  if (s.schema_version != kSchemaVersion) {
    throw Error(ErrorCode::version, "unsupported state schema version " + std::to_string(s.schema_version),
                {{"found", s.schema_version}, {"supported", kSchemaVersion}});
  }
  if (s.dataset && dataset::fingerprint(*s.dataset) != s.dataset_fingerprint) {
    broken("dataset does not match its fingerprint", "dataset/fingerprint");
  }
  if (s.model && !s.spec) broken("calibration without a model specification", "calibration");
  if (s.model) {
    const auto& m = *s.model;
    if (m.family != s.spec->family) broken("calibration family differs from the specification", "calibration/family");
    std::vector<std::string> expected = {"intercept"};
    expected.insert(expected.end(), s.spec->independents.begin(), s.spec->independents.end());
    if (m.surface_names != expected) broken("calibration surfaces differ from the specification", "calibration/surface_names");
    if (m.target.name != s.spec->dependent) broken("calibration target differs from the specification", "calibration/target");
    if (s.dataset) {
      for (std::size_t i = 0; i < m.region_ids.size(); ++i) {
        if (m.rows[i] >= s.dataset->size() || s.dataset->region_ids[m.rows[i]] != m.region_ids[i]) {
          broken("calibrated region is not in the dataset", "calibration/region_ids/" + m.region_ids[i]);
        }
      }
    }
  }
  if (s.diagnostics) {
    if (!s.model) broken("diagnostics without a calibration", "diagnostics");
    if (s.diagnostics->region_ids != s.model->region_ids) broken("diagnostics cover other regions", "diagnostics/region_ids");
    if (s.diagnostics->significance.mask.size() != s.model->surfaces()) {
      broken("significance mask has the wrong surface count", "diagnostics/significance");
    }
  }
  for (const auto& [k, v] : s.clusters) {
    if (!s.model) broken("clusters without a calibration", "clusters/" + k);
    check_clusters(k, v, *s.model);
  }
  for (const auto& [k, v] : s.narrative_edits) check_edits(k, v, s);
  for (const auto& [k, a] : s.assets) {
    if (a.id != k) broken("asset stored under another id", "assets/" + k);
  }
  if (s.report) {
    const auto missing = report::unresolved_assets(*s.report, s.assets);
    if (!missing.empty()) broken("report references an unknown asset", "assets/" + missing.front());
  }
}

std::string analysis_hash(const AnalyticalState& s) {
  auto j = to_json_impl(s, false);
  j.erase("report");
  j.erase("assets");
  j.erase("narrative_edits");
  j.erase("corpus_cache_keys");
  return sha256_hex(jsonio::canonical_dump(j));
}

std::string save_state(const AnalyticalState& state, const SaveOptions& options) {
  AnalyticalState s = state;
  if (s.dataset && s.dataset_fingerprint.empty()) s.dataset_fingerprint = dataset::fingerprint(*s.dataset);
  validate(s);
  return jsonio::canonical_dump(to_json_impl(s, options.embed_dataset));
}

AnalyticalState load_state(std::string_view bytes, const dataset::GeoFeatureTable* provided) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("state file is not valid JSON: ") + e.what());
  }
  using jsonio::require;
  AnalyticalState s;
  try {
    const auto& version = require(j, "schema_version");
    if (!version.is_number_integer() || version.get<long long>() != kSchemaVersion) {
      throw Error(ErrorCode::version, "unsupported state schema version " + version.dump(),
                  {{"found", version}, {"supported", kSchemaVersion}});
    }
    const auto& ds = require(j, "dataset");
    s.dataset_fingerprint = require(ds, "fingerprint").get<std::string>();
    if (ds.contains("table")) s.dataset = dataset::table_from_json(ds["table"]);
    s.settings = settings_from_json(require(j, "settings"));
    if (j.contains("spec")) s.spec = regression::spec_from_json(j["spec"]);
    if (j.contains("calibration")) s.model = regression::model_from_json(j["calibration"]);
    if (j.contains("diagnostics")) s.diagnostics = diagnostics::report_from_json(j["diagnostics"]);
    for (const auto& [k, v] : require(j, "clusters").items()) s.clusters[k] = patterns::cluster_set_from_json(v);
    for (const auto& [k, v] : require(j, "narrative_edits").items()) {
      s.narrative_edits[k] = v.get<narrative::Edits>();
    }
    if (j.contains("report")) s.report = report::report_from_json(j["report"]);
    for (const auto& a : require(j, "assets")) {
      auto asset = report::asset_from_json(a);
      const auto id = asset.id;
      if (!s.assets.emplace(id, std::move(asset)).second) broken("duplicate asset id", "assets/" + id);
    }
    s.corpus_cache_keys = require(j, "corpus_cache_keys").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed state file: ") + e.what());
  }
  if (provided) {
    if (dataset::fingerprint(*provided) != s.dataset_fingerprint) {
      throw Error(ErrorCode::integrity, "supplied dataset does not match the state fingerprint",
                  {{"reference", "dataset/fingerprint"}, {"expected", s.dataset_fingerprint}});
    }
    if (!s.dataset) s.dataset = *provided;
  }
  validate(s);
  return s;
}

}  // namespace geolens::state
