#include "geolens/service/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"
#include "geolens/screening/screening.hpp"

namespace geolens::service {

using nlohmann::json;

const dataset::GeoFeatureTable& require_dataset(const state::AnalyticalState& s) {
  if (!s.dataset) throw Error(ErrorCode::not_found, "no dataset loaded", {{"missing", "dataset"}});
  return *s.dataset;
}

const regression::CalibratedModel& require_model(const state::AnalyticalState& s) {
  if (!s.model) throw Error(ErrorCode::not_found, "no calibrated model; train first", {{"missing", "calibration"}});
  return *s.model;
}

const diagnostics::DiagnosticsReport& require_diagnostics(const state::AnalyticalState& s) {
  if (!s.diagnostics) throw Error(ErrorCode::not_found, "no diagnostics; run diagnose first", {{"missing", "diagnostics"}});
  return *s.diagnostics;
}

state::AnalyticalState ingest(dataset::GeoFeatureTable table) {
  state::AnalyticalState s;
  s.dataset_fingerprint = dataset::fingerprint(table);
  s.dataset = std::move(table);
  return s;
}

json dataset_summary(const state::AnalyticalState& s) {
  const auto& t = require_dataset(s);
  json columns = json::array();
  for (const auto& [name, values] : t.columns) {
    const auto missing = std::count_if(values.begin(), values.end(), [](double v) { return std::isnan(v); });
    columns.push_back({{"name", name}, {"missing", missing}});
  }
  json flagged = json::array();
  for (auto i : t.flagged_rows()) flagged.push_back(t.region_ids[i]);
  return {{"fingerprint", s.dataset_fingerprint}, {"regions", t.size()}, {"columns", columns},
          {"flagged_region_ids", flagged}};
}

json feature_profile(const state::AnalyticalState& s, const std::string& column) {
  const auto& t = require_dataset(s);
  if (!t.has_column(column)) throw Error(ErrorCode::not_found, "unknown column '" + column + "'", {{"column", column}});
  const auto profile = screening::profile_feature(t.column(column));
  auto j = screening::to_json(profile);
  j["name"] = column;
  j["narrative"] = narrative::to_json(narrative::render_feature_narrative(column, profile));
  return j;
}

json screen(const state::AnalyticalState& s, const std::string& dependent, const std::vector<std::string>& independents) {
  const auto& t = require_dataset(s);
  std::vector<std::string> names;
  if (!dependent.empty()) names.push_back(dependent);
  names.insert(names.end(), independents.begin(), independents.end());
  if (names.empty()) {
    for (const auto& [name, values] : t.columns) names.push_back(name);
  }
  for (const auto& n : names) {
    if (!t.has_column(n)) throw Error(ErrorCode::not_found, "unknown column '" + n + "'", {{"column", n}});
  }
  const auto flagged = t.flagged_rows(names);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0, f = 0; i < t.size(); ++i) {
    if (f < flagged.size() && flagged[f] == i) ++f;
    else rows.push_back(i);
  }
  auto complete = [&](const std::string& name) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(t.column(name)[r]);
    return out;
  };

  json profiles = json::array();
  for (const auto& n : names) profiles.push_back(feature_profile(s, n));

  const double threshold = s.settings.correlation_threshold;
  std::vector<screening::CorrelationResult> pairs;
  for (std::size_t a = 0; a < names.size(); ++a) {
    for (std::size_t b = a + 1; b < names.size(); ++b) {
      auto r = screening::pearson(complete(names[a]), complete(names[b]), threshold);
      r.x = names[a];
      r.y = names[b];
      pairs.push_back(std::move(r));
    }
  }
  json correlations = json::array();
  for (const auto& r : pairs) correlations.push_back(screening::to_json(r));

  json vif_json = json::array();
  std::vector<narrative::VifEntry> vif_entries;
  const auto& vars = independents.empty() ? names : independents;
  if (vars.size() >= 2) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(vars.size()));
    for (std::size_t c = 0; c < vars.size(); ++c) {
      const auto col = complete(vars[c]);
      for (std::size_t i = 0; i < col.size(); ++i) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = col[i];
    }
    const auto v = screening::vif(X);
    for (std::size_t c = 0; c < vars.size(); ++c) {
      vif_json.push_back({{"variable", vars[c]},
                          {"vif", jsonio::encode(v.values[c])},
                          {"severe", static_cast<bool>(v.severe[c])},
                          {"collinear", static_cast<bool>(v.collinear[c])}});
      vif_entries.push_back({vars[c], v.values[c]});
    }
  }
  const auto doc = narrative::render_correlation_narrative(pairs, vif_entries, threshold);
  return {{"variables", names},
          {"complete_rows", rows.size()},
          {"profiles", profiles},
          {"correlations", correlations},
          {"vif", vif_json},
          {"narrative", narrative::to_json(doc)}};
}

json choropleth(const state::AnalyticalState& s, const std::string& variable, int k) {
  const auto& t = require_dataset(s);
  if (!t.has_column(variable)) throw Error(ErrorCode::not_found, "unknown column '" + variable + "'", {{"column", variable}});
  auto j = screening::to_json(screening::classify_quantile(t.column(variable), k));
  j["variable"] = variable;
  j["region_ids"] = t.region_ids;
  return j;
}

json bivariate_choropleth(const state::AnalyticalState& s, const std::string& dependent, const std::string& independent,
                          int k) {
  const auto& t = require_dataset(s);
  for (const auto& n : {dependent, independent}) {
    if (!t.has_column(n)) throw Error(ErrorCode::not_found, "unknown column '" + n + "'", {{"column", n}});
  }
  auto j = screening::to_json(screening::classify_bivariate(t.column(dependent), t.column(independent), k));
  j["dependent_variable"] = dependent;
  j["independent_variable"] = independent;
  j["region_ids"] = t.region_ids;
  return j;
}

void store_calibration(state::AnalyticalState& s, const regression::ModelSpec& spec, regression::CalibratedModel model) {
  s.spec = spec;
  s.model = std::move(model);
  s.diagnostics.reset();
  s.clusters.clear();
  s.narrative_edits.clear();
}

void run_diagnostics(state::AnalyticalState& s, const dataset::SpatialWeights& weights) {
  const auto& model = require_model(s);
  diagnostics::Options o;
  o.xi = s.settings.xi;
  o.permutations = s.settings.permutations;
  o.seed = s.settings.moran_seed;
  o.convention = s.settings.convention;
  s.diagnostics = diagnostics::diagnose(model, require_dataset(s), weights, o);
  s.clusters.clear();
  for (auto it = s.narrative_edits.begin(); it != s.narrative_edits.end();) {
    it = it->first.rfind("coefficient:", 0) == 0 ? s.narrative_edits.erase(it) : std::next(it);
  }
}

void run_clusters(state::AnalyticalState& s, const dataset::SpatialWeights& weights,
                  const std::vector<std::string>& surfaces) {
  const auto& model = require_model(s);
  const auto& diag = require_diagnostics(s);
  const auto& names = surfaces.empty() ? model.surface_names : surfaces;
  patterns::ClusterParams params;
  params.resolution = s.settings.cluster_resolution;
  params.min_size = s.settings.cluster_min_size;
  params.seed = s.settings.leiden_seed;
  for (const auto& name : names) {
    const auto j = model.surface_index(name);
    s.clusters[name] =
        patterns::detect_clusters(name, model, diag.significance.mask[j], weights, require_dataset(s), params);
    s.narrative_edits.erase("coefficient:" + name);
  }
}

json surface_values(const state::AnalyticalState& s, const std::string& surface) {
  const auto& m = require_model(s);
  const auto j = m.surface_index(surface);
  const auto n = m.n();
  std::vector<double> standardized(n), data_scale(n), se(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    standardized[i] = m.coefficients(ii, jj);
    se[i] = m.local_se(ii, jj);
    data_scale[i] = patterns::data_scale_coefficient(m, i, j);
  }
  json out = {{"surface", surface},
              {"region_ids", m.region_ids},
              {"standardized", jsonio::encode(standardized)},
              {"data_scale", jsonio::encode(data_scale)},
              {"local_se", jsonio::encode(se)},
              {"bandwidth", m.bandwidths.empty() ? json(nullptr)
                                                 : jsonio::encode(m.bandwidths.size() == 1 ? m.bandwidths[0] : m.bandwidths[j])},
              {"enp", m.enp_per_surface.empty() ? json(nullptr) : jsonio::encode(m.enp_per_surface[j])}};
  if (s.diagnostics) {
    const auto& sig = s.diagnostics->significance;
    out["significant"] = jsonio::encode_bits(sig.mask[j]);
    out["adjusted_alpha"] = jsonio::encode(sig.adjusted_alpha[j]);
    out["t_critical"] = jsonio::encode(sig.t_critical[j]);
  }
  return out;
}

narrative::NarrativeDoc coefficient_narrative(const state::AnalyticalState& s, const std::string& surface) {
  const auto& model = require_model(s);
  const auto& diag = require_diagnostics(s);
  const auto j = model.surface_index(surface);
  const auto it = s.clusters.find(surface);
  if (it == s.clusters.end()) {
    throw Error(ErrorCode::not_found, "no clusters for surface '" + surface + "'; run clusters first", {{"surface", surface}});
  }
  const auto e = s.narrative_edits.find("coefficient:" + surface);
  return narrative::render_coefficient_narrative(surface, it->second, diag.significance.mask[j], model,
                                                 e == s.narrative_edits.end() ? narrative::Edits{} : e->second);
}

narrative::NarrativeDoc diagnostic_narrative(const state::AnalyticalState& s, narrative::DiagnosticKind kind) {
  const auto& diag = require_diagnostics(s);
  const auto e = s.narrative_edits.find("diagnostic:" + std::string(narrative::to_string(kind)));
  return narrative::render_diagnostic_narrative(kind, diag, require_dataset(s), s.settings.local_r2_threshold,
                                                e == s.narrative_edits.end() ? narrative::Edits{} : e->second);
}

narrative::NarrativeDoc edit_identifier(state::AnalyticalState& s, const std::string& family, const std::string& subject,
                                        const std::string& paragraph_id, const std::string& label) {
  narrative::NarrativeDoc doc;
  std::string key;
  if (family == "coefficient") {
    doc = coefficient_narrative(s, subject);
    key = "coefficient:" + subject;
  } else if (family == "diagnostic") {
    doc = diagnostic_narrative(s, narrative::diagnostic_kind_from_string(subject));
    key = "diagnostic:" + subject;
  } else {
    throw Error(ErrorCode::invalid_argument, "identifier edits apply to coefficient or diagnostic narratives",
                {{"family", family}});
  }
  auto edited = narrative::apply_identifier_edit(doc, paragraph_id, label);
  if (edited.edits.empty()) s.narrative_edits.erase(key);
  else s.narrative_edits[key] = edited.edits;
  return edited;
}

std::vector<std::string> cluster_regions(const state::AnalyticalState& s, const std::string& cluster_id) {
  const auto surface = cluster_id.substr(0, cluster_id.find('/'));
  const auto it = s.clusters.find(surface);
  const patterns::Cluster* c = it == s.clusters.end() ? nullptr : it->second.find(cluster_id);
  if (!c) throw Error(ErrorCode::not_found, "unknown cluster '" + cluster_id + "'", {{"cluster_id", cluster_id}});
  return c->region_ids;
}

void add_narratives_to_report(state::AnalyticalState& s, const std::vector<narrative::NarrativeDoc>& docs,
                              const std::string& timestamp) {
  if (!s.report) {
    s.report = report::Report{};
    s.report->created_at = timestamp;
    s.report->modified_at = timestamp;
  }
  const auto hash = state::analysis_hash(s);
  for (const auto& doc : docs) {
    s.report->template_version = doc.template_version;
    json item = {{"kind", "paragraph"},
                 {"content", narrative::to_html(doc)},
                 {"provenance", {{"module", "narrative/" + doc.kind + (doc.subject.empty() ? "" : ":" + doc.subject)},
                                 {"state_hash", hash},
                                 {"template_version", doc.template_version}}}};
    s.report = report::mutate_report(*s.report, report::Action::add, {{"item", item}}, timestamp).report;
  }
}

std::vector<narrative::NarrativeDoc> all_narratives(const state::AnalyticalState& s) {
  std::vector<narrative::NarrativeDoc> out;
  const auto& model = require_model(s);
  for (const auto& name : model.surface_names) {
    if (s.clusters.contains(name)) out.push_back(coefficient_narrative(s, name));
  }
  for (auto kind : {narrative::DiagnosticKind::local_r2, narrative::DiagnosticKind::cooks_d,
                    narrative::DiagnosticKind::std_residual}) {
    out.push_back(diagnostic_narrative(s, kind));
  }
  return out;
}

}  // namespace geolens::service
