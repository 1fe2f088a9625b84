#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geolens/dataset/table.hpp"
#include "geolens/diagnostics/diagnostics.hpp"
#include "geolens/narrative/templates.hpp"
#include "geolens/patterns/clusters.hpp"
#include "geolens/regression/model.hpp"
#include "geolens/screening/screening.hpp"

namespace geolens::narrative {

struct Paragraph {
  std::string id;
  std::string template_id;
  /// Placeholder values the paragraph was rendered from.
  nlohmann::json bindings;
  /// Seed label for the location placeholder; empty when not editable.
  std::string default_location;
  std::string pattern_html;
  std::string explanation_html;
  std::string text;  // plain text of both phrases
  std::vector<std::string> anchors;
  /// Keyphrase query for this paragraph: {"cluster_id": ...} or {"region_ids": [...]}.
  nlohmann::json trigger;
  std::vector<Paragraph> children;

  friend bool operator==(const Paragraph&, const Paragraph&) = default;
};

struct NarrativeDoc {
  std::string kind;
  std::string subject;
  std::string template_version;
  std::vector<Paragraph> paragraphs;
  std::map<std::string, std::string> edits;
  std::vector<std::string> notes;

  const Paragraph* find(const std::string& id) const;
  friend bool operator==(const NarrativeDoc&, const NarrativeDoc&) = default;
};

using Edits = std::map<std::string, std::string>;

NarrativeDoc render_feature_narrative(const std::string& feature, const screening::FeatureProfile& profile,
                                      const TemplateSet& templates = default_templates());

struct VifEntry {
  std::string variable;
  double vif = 0.0;
};

NarrativeDoc render_correlation_narrative(const std::vector<screening::CorrelationResult>& results,
                                          const std::vector<VifEntry>& vifs = {},
                                          double threshold = screening::kStrongCorrelation,
                                          const TemplateSet& templates = default_templates());

enum class DiagnosticKind { local_r2, cooks_d, std_residual };
std::string_view to_string(DiagnosticKind k);
DiagnosticKind diagnostic_kind_from_string(std::string_view s);

/// Significance level used to call residual autocorrelation significant.
inline constexpr double kMoranAlpha = 0.05;

NarrativeDoc render_diagnostic_narrative(DiagnosticKind kind, const diagnostics::DiagnosticsReport& report,
                                         const dataset::GeoFeatureTable& table, double threshold = 0.5,
                                         const Edits& edits = {}, const TemplateSet& templates = default_templates());

NarrativeDoc render_coefficient_narrative(const std::string& surface, const patterns::ClusterSet& clusters,
                                          const std::vector<bool>& mask, const regression::CalibratedModel& model,
                                          const Edits& edits = {}, const TemplateSet& templates = default_templates());

/// Stores `label` as the location identifier of `paragraph_id`; an empty
/// label clears the edit. Only that paragraph is re-rendered.
NarrativeDoc apply_identifier_edit(const NarrativeDoc& doc, const std::string& paragraph_id, const std::string& label,
                                   const TemplateSet& templates = default_templates());

/// Regions a kind classifies; the union of its group anchors equals this set.
std::vector<std::string> classified_regions(DiagnosticKind kind, const diagnostics::DiagnosticsReport& report);

nlohmann::json to_json(const NarrativeDoc& d);
NarrativeDoc narrative_from_json(const nlohmann::json& j);

/// Whole document as an HTML fragment (nested lists for sub-paragraphs).
std::string to_html(const NarrativeDoc& d);

}  // namespace geolens::narrative
