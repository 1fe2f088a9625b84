#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geolens/dataset/table.hpp"
#include "geolens/diagnostics/diagnostics.hpp"
#include "geolens/narrative/narrative.hpp"
#include "geolens/patterns/clusters.hpp"
#include "geolens/regression/model.hpp"
#include "geolens/report/report.hpp"

namespace geolens::state {

inline constexpr int kSchemaVersion = 1;

struct Settings {
  double xi = 0.05;
  int permutations = 999;
  diagnostics::ResidualConvention convention = diagnostics::ResidualConvention::predicted_minus_observed;
  double local_r2_threshold = 0.5;
  double correlation_threshold = 0.7;
  double cluster_resolution = 1.0;
  std::size_t cluster_min_size = 2;
  std::uint64_t moran_seed = 0;
  std::uint64_t leiden_seed = 0;

  friend bool operator==(const Settings&, const Settings&) = default;
};

/// Everything needed to resume an analysis without retraining.
struct AnalyticalState {
  int schema_version = kSchemaVersion;
  std::string dataset_fingerprint;
  std::optional<dataset::GeoFeatureTable> dataset;
  Settings settings;
  std::optional<regression::ModelSpec> spec;
  std::optional<regression::CalibratedModel> model;
  std::optional<diagnostics::DiagnosticsReport> diagnostics;
  std::map<std::string, patterns::ClusterSet> clusters;  // by surface
  /// Location-identifier edits per narrative ("coefficient:<surface>", "diagnostic:<kind>").
  std::map<std::string, narrative::Edits> narrative_edits;
  std::optional<report::Report> report;
  report::AssetMap assets;
  std::vector<std::string> corpus_cache_keys;
};

struct SaveOptions {
  bool embed_dataset = true;
};

/// Canonical bytes: sorted keys, no whitespace, shortest round-trip floats.
/// Integrity is checked before any bytes are produced.
std::string save_state(const AnalyticalState& state, const SaveOptions& options = {});

/// Parses and validates. `dataset` supplies the table for fingerprint-only
/// files and is checked against the stored fingerprint.
AnalyticalState load_state(std::string_view bytes, const dataset::GeoFeatureTable* dataset = nullptr);

/// Throws integrity errors naming the first unresolved reference.
void validate(const AnalyticalState& state);

/// Hash of the analysis sections (dataset fingerprint, settings, spec, model,
/// diagnostics, clusters); stamped into report provenance.
std::string analysis_hash(const AnalyticalState& state);

nlohmann::json to_json(const Settings& s);
Settings settings_from_json(const nlohmann::json& j);

}  // namespace geolens::state
