#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geolens/context/context.hpp"
#include "geolens/dataset/weights.hpp"
#include "geolens/narrative/narrative.hpp"
#include "geolens/state/state.hpp"

namespace geolens::service {

/// Steps shared by the HTTP service and the CLI. Each reads what it needs
/// from the state and throws not_found when an earlier step is missing.

const dataset::GeoFeatureTable& require_dataset(const state::AnalyticalState& s);
const regression::CalibratedModel& require_model(const state::AnalyticalState& s);
const diagnostics::DiagnosticsReport& require_diagnostics(const state::AnalyticalState& s);

/// Fresh state holding `table`; all later sections are empty.
state::AnalyticalState ingest(dataset::GeoFeatureTable table);

nlohmann::json dataset_summary(const state::AnalyticalState& s);

nlohmann::json feature_profile(const state::AnalyticalState& s, const std::string& column);

/// Profiles, pairwise correlations and VIF over the chosen variables, with narratives.
nlohmann::json screen(const state::AnalyticalState& s, const std::string& dependent,
                      const std::vector<std::string>& independents);

nlohmann::json choropleth(const state::AnalyticalState& s, const std::string& variable, int k);
nlohmann::json bivariate_choropleth(const state::AnalyticalState& s, const std::string& dependent,
                                    const std::string& independent, int k);

/// Stores spec and model; clears everything computed from an earlier model.
void store_calibration(state::AnalyticalState& s, const regression::ModelSpec& spec,
                       regression::CalibratedModel model);

void run_diagnostics(state::AnalyticalState& s, const dataset::SpatialWeights& weights);

/// Clusters for the given surfaces (every surface when empty).
void run_clusters(state::AnalyticalState& s, const dataset::SpatialWeights& weights,
                  const std::vector<std::string>& surfaces = {});

nlohmann::json surface_values(const state::AnalyticalState& s, const std::string& surface);

narrative::NarrativeDoc coefficient_narrative(const state::AnalyticalState& s, const std::string& surface);
narrative::NarrativeDoc diagnostic_narrative(const state::AnalyticalState& s, narrative::DiagnosticKind kind);

/// Re-renders after editing a location identifier and records the edit.
narrative::NarrativeDoc edit_identifier(state::AnalyticalState& s, const std::string& family, const std::string& subject,
                                        const std::string& paragraph_id, const std::string& label);

/// Region ids of a cluster id "<surface>/<sign>/<k>".
std::vector<std::string> cluster_regions(const state::AnalyticalState& s, const std::string& cluster_id);

/// Appends one paragraph item per narrative, stamped with the analysis hash.
void add_narratives_to_report(state::AnalyticalState& s, const std::vector<narrative::NarrativeDoc>& docs,
                              const std::string& timestamp);

/// Every coefficient narrative for the covariate surfaces plus the three diagnostic narratives.
std::vector<narrative::NarrativeDoc> all_narratives(const state::AnalyticalState& s);

}  // namespace geolens::service
