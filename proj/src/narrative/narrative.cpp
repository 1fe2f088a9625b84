#include "geolens/narrative/narrative.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"

namespace geolens::narrative {

using nlohmann::json;

namespace {

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string full_precision(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string location_label(const Paragraph& p, const Edits& edits) {
  auto it = edits.find(p.id);
  return it != edits.end() ? it->second : p.default_location;
}

// Fills the rendered fields of `p` from its bindings.
void render(Paragraph& p, const TemplateSet& templates, const Edits& edits) {
  const auto& tpl = templates.at(p.template_id);
  std::string html[2], plain[2];
  for (const auto& slot : tpl.slots) {
    const int r = slot.role == Role::pattern_description ? 0 : 1;
    std::string h, t;
    const auto& s = slot.text;
    std::size_t pos = 0;
    while (pos < s.size()) {
      const auto open = s.find('{', pos);
      if (open == std::string::npos) {
        h += escape(s.substr(pos));
        t += s.substr(pos);
        break;
      }
      h += escape(s.substr(pos, open - pos));
      t += s.substr(pos, open - pos);
      const auto close = s.find('}', open);
      const auto name = s.substr(open + 1, close - open - 1);
      const auto type = tpl.placeholders.at(name);
      if (type == PlaceholderType::location) {
        const auto label = location_label(p, edits);
        h += "<span class=\"loc\" data-paragraph=\"" + escape(p.id) + "\">" + escape(label) + "</span>";
        t += label;
      } else {
        if (!p.bindings.contains(name)) {
          throw Error(ErrorCode::integrity, "paragraph '" + p.id + "' has no value for '" + name + "'",
                      {{"paragraph", p.id}, {"placeholder", name}});
        }
        const auto& v = p.bindings.at(name);
        if (type == PlaceholderType::number) {
          const double x = jsonio::decode_double(v);
          const auto shown = format_number(x);
          h += "<span class=\"num\" data-key=\"" + name + "\" data-value=\"" + full_precision(x) + "\"";
          if (p.bindings.contains("_standardized") && p.bindings["_standardized"].contains(name)) {
            h += " data-standardized=\"" + full_precision(jsonio::decode_double(p.bindings["_standardized"][name])) + "\"";
          }
          h += ">" + shown + "</span>";
          t += shown;
        } else if (type == PlaceholderType::integer) {
          const auto shown = std::to_string(v.get<long long>());
          h += "<span class=\"num\" data-key=\"" + name + "\" data-value=\"" + shown + "\">" + shown + "</span>";
          t += shown;
        } else if (type == PlaceholderType::regions) {
          std::string joined;
          for (const auto& id : v) joined += (joined.empty() ? "" : ", ") + id.get<std::string>();
          h += "<span class=\"regions\">" + escape(joined) + "</span>";
          t += joined;
        } else {
          const auto text = v.get<std::string>();
          h += escape(text);
          t += text;
        }
      }
      pos = close + 1;
    }
    for (auto* dst : {&html[r], &plain[r]}) {
      if (!dst->empty()) *dst += ' ';
    }
    html[r] += h;
    plain[r] += t;
  }
  p.pattern_html = html[0];
  p.explanation_html = html[1];
  p.text = plain[0] + " " + plain[1];
}

Paragraph make(std::string id, std::string template_id, json bindings, std::vector<std::string> anchors = {},
               std::string location = {}) {
  Paragraph p;
  p.id = std::move(id);
  p.template_id = std::move(template_id);
  p.bindings = std::move(bindings);
  p.anchors = std::move(anchors);
  p.default_location = std::move(location);
  p.trigger = {{"region_ids", p.anchors}};
  return p;
}

Paragraph* find_mut(std::vector<Paragraph>& list, const std::string& id) {
  for (auto& p : list) {
    if (p.id == id) return &p;
    if (auto* c = find_mut(p.children, id)) return c;
  }
  return nullptr;
}

const Paragraph* find_in(const std::vector<Paragraph>& list, const std::string& id) {
  for (const auto& p : list) {
    if (p.id == id) return &p;
    if (const auto* c = find_in(p.children, id)) return c;
  }
  return nullptr;
}

std::string area_seed(const std::vector<std::string>& ids, const dataset::GeoFeatureTable& table) {
  double lon = 0.0, lat = 0.0;
  for (const auto& id : ids) {
    const auto& g = table.geo_centroids.at(table.index_of(id));
    lon += g.lon;
    lat += g.lat;
  }
  const double k = static_cast<double>(ids.size());
  char buf[96];
  std::snprintf(buf, sizeof buf, "the area near (%.2f, %.2f)", lat / k, lon / k);
  return buf;
}

std::pair<double, double> range_of(const std::vector<double>& values, const std::vector<std::size_t>& idx) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto i : idx) {
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  return {lo, hi};
}

std::vector<std::string> ids_of(const std::vector<std::string>& region_ids, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(region_ids[i]);
  return out;
}

json params_of(DiagnosticKind) { return json::object(); }

}  // namespace

const Paragraph* NarrativeDoc::find(const std::string& id) const { return find_in(paragraphs, id); }

NarrativeDoc render_feature_narrative(const std::string& feature, const screening::FeatureProfile& profile,
                                      const TemplateSet& templates) {
  NarrativeDoc doc;
  doc.kind = "feature";
  doc.subject = feature;
  doc.template_version = templates.version;
  json b = {{"feature", feature},
            {"skewness", jsonio::encode(profile.skewness)},
            {"ks_statistic", jsonio::encode(profile.ks_statistic)},
            {"ks_p", jsonio::encode(profile.ks_p)}};
  std::string tpl;
  if (!profile.suggested_transforms.empty()) {
    tpl = "feature.skewed";
    b["direction"] = profile.skewness > 0 ? "right" : "left";
    std::string list;
    for (std::size_t i = 0; i < profile.suggested_transforms.size(); ++i) {
      if (i) list += i + 1 == profile.suggested_transforms.size() ? " or " : ", ";
      list += screening::to_string(profile.suggested_transforms[i]);
    }
    b["transforms"] = list;
  } else if (profile.ks_p > 0.05) {
    tpl = "feature.normal";
  } else {
    tpl = "feature.non_normal";
  }
  auto p = make("feature:" + feature, tpl, std::move(b));
  p.trigger = json::object();
  render(p, templates, doc.edits);
  doc.paragraphs.push_back(std::move(p));
  return doc;
}

NarrativeDoc render_correlation_narrative(const std::vector<screening::CorrelationResult>& results,
                                          const std::vector<VifEntry>& vifs, double threshold,
                                          const TemplateSet& templates) {
  NarrativeDoc doc;
  doc.kind = "correlation";
  doc.template_version = templates.version;
  bool any_flag = false;
  for (const auto& r : results) {
    const double a = std::abs(r.r);
    const bool strong = a >= threshold;
    any_flag = any_flag || strong;
    json b = {{"a", r.x},
              {"b", r.y},
              {"strength", strong ? "strong" : a >= 0.3 ? "moderate" : "weak"},
              {"direction", r.r < 0 ? "negative" : "positive"},
              {"r", jsonio::encode(r.r)},
              {"p", jsonio::encode(r.p)}};
    auto p = make("correlation:" + r.x + "|" + r.y, strong ? "correlation.redundant" : "correlation.pair", std::move(b));
    p.trigger = json::object();
    render(p, templates, doc.edits);
    doc.paragraphs.push_back(std::move(p));
  }
  for (const auto& v : vifs) {
    if (!(v.vif > screening::kSevereVif)) continue;
    any_flag = true;
    auto p = make("vif:" + v.variable, "correlation.vif",
                  {{"variable", v.variable}, {"vif", jsonio::encode(v.vif)}, {"threshold", jsonio::encode(screening::kSevereVif)}});
    p.trigger = json::object();
    render(p, templates, doc.edits);
    doc.paragraphs.push_back(std::move(p));
  }
  if (!any_flag) {
    auto p = make("correlation:clear", "correlation.clear",
                  {{"count", results.size()}, {"threshold", jsonio::encode(threshold)}});
    p.trigger = json::object();
    render(p, templates, doc.edits);
    doc.paragraphs.push_back(std::move(p));
  }
  return doc;
}

std::string_view to_string(DiagnosticKind k) {
  switch (k) {
    case DiagnosticKind::local_r2: return "local_r2";
    case DiagnosticKind::cooks_d: return "cooks_d";
    case DiagnosticKind::std_residual: return "std_residual";
  }
  return "local_r2";
}

DiagnosticKind diagnostic_kind_from_string(std::string_view s) {
  if (s == "local_r2") return DiagnosticKind::local_r2;
  if (s == "cooks_d") return DiagnosticKind::cooks_d;
  if (s == "std_residual") return DiagnosticKind::std_residual;
  throw Error(ErrorCode::invalid_argument, "unknown diagnostic kind '" + std::string(s) + "'");
}

std::vector<std::string> classified_regions(DiagnosticKind kind, const diagnostics::DiagnosticsReport& r) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < r.region_ids.size(); ++i) {
    bool in = false;
    switch (kind) {
      case DiagnosticKind::local_r2: in = !r.local_r2.undefined[i]; break;
      case DiagnosticKind::cooks_d: in = r.cooks_d.outlier[i]; break;
      case DiagnosticKind::std_residual: in = r.std_residuals.labels[i] != diagnostics::ResidualLabel::neutral; break;
    }
    if (in) out.push_back(r.region_ids[i]);
  }
  return out;
}

NarrativeDoc render_diagnostic_narrative(DiagnosticKind kind, const diagnostics::DiagnosticsReport& r,
                                         const dataset::GeoFeatureTable& table, double threshold, const Edits& edits,
                                         const TemplateSet& templates) {
  NarrativeDoc doc;
  doc.kind = std::string(to_string(kind));
  doc.template_version = templates.version;
  doc.edits = edits;
  (void)params_of(kind);
  const auto n = r.region_ids.size();

  auto group = [&](const std::string& id, const std::string& tpl, const std::vector<std::size_t>& idx,
                   const std::vector<double>& values, json extra) {
    const auto [lo, hi] = range_of(values, idx);
    extra["count"] = idx.size();
    extra["min"] = jsonio::encode(lo);
    extra["max"] = jsonio::encode(hi);
    auto ids = ids_of(r.region_ids, idx);
    auto seed = area_seed(ids, table);
    auto p = make(id, tpl, std::move(extra), std::move(ids), std::move(seed));
    render(p, templates, doc.edits);
    doc.paragraphs.push_back(std::move(p));
  };

  switch (kind) {
    case DiagnosticKind::local_r2: {
      std::vector<std::size_t> high, low;
      std::size_t undefined = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (r.local_r2.undefined[i]) {
          ++undefined;
          continue;
        }
        (r.local_r2.values[i] >= threshold ? high : low).push_back(i);
      }
      const json t = {{"threshold", jsonio::encode(threshold)}};
      if (!high.empty()) group("local_r2/high", "local_r2.high", high, r.local_r2.values, t);
      else doc.notes.push_back("No region has local R² at or above " + format_number(threshold) + ".");
      if (!low.empty()) group("local_r2/low", "local_r2.low", low, r.local_r2.values, t);
      else doc.notes.push_back("No region has local R² below " + format_number(threshold) + ".");
      if (undefined) doc.notes.push_back(std::to_string(undefined) + " regions have undefined local R² and are left out.");
      break;
    }
    case DiagnosticKind::cooks_d: {
      std::vector<std::size_t> out;
      for (std::size_t i = 0; i < n; ++i) {
        if (r.cooks_d.outlier[i]) out.push_back(i);
      }
      if (!out.empty()) {
        group("cooks_d/outliers", "cooks_d.outliers", out, r.cooks_d.values, {{"threshold", jsonio::encode(r.cooks_d.threshold)}});
      } else {
        double hi = 0.0;
        for (double v : r.cooks_d.values) hi = std::max(hi, v);
        auto p = make("cooks_d/none", "cooks_d.none",
                      {{"threshold", jsonio::encode(r.cooks_d.threshold)}, {"max", jsonio::encode(hi)}});
        render(p, templates, doc.edits);
        doc.paragraphs.push_back(std::move(p));
      }
      break;
    }
    case DiagnosticKind::std_residual: {
      std::vector<std::size_t> over, under;
      for (std::size_t i = 0; i < n; ++i) {
        if (r.std_residuals.labels[i] == diagnostics::ResidualLabel::over) over.push_back(i);
        else if (r.std_residuals.labels[i] == diagnostics::ResidualLabel::under) under.push_back(i);
      }
      if (!over.empty()) group("std_residual/over", "std_residual.over", over, r.std_residuals.values, json::object());
      else doc.notes.push_back("No region is over-predicted.");
      if (!under.empty()) group("std_residual/under", "std_residual.under", under, r.std_residuals.values, json::object());
      else doc.notes.push_back("No region is under-predicted.");
      const auto& m = r.morans_i_residuals;
      auto p = make("std_residual/moran", m.p_value <= kMoranAlpha ? "std_residual.moran_clustered" : "std_residual.moran_random",
                    {{"morans_i", jsonio::encode(m.statistic)}, {"p_value", jsonio::encode(m.p_value)}});
      p.trigger = json::object();
      render(p, templates, doc.edits);
      doc.paragraphs.push_back(std::move(p));
      break;
    }
  }
  return doc;
}

NarrativeDoc render_coefficient_narrative(const std::string& surface, const patterns::ClusterSet& clusters,
                                          const std::vector<bool>& mask, const regression::CalibratedModel& model,
                                          const Edits& edits, const TemplateSet& templates) {
  const auto j = model.surface_index(surface);
  const bool intercept = j == 0;
  const std::string family = intercept ? "intercept" : "coefficient";
  const auto& dependent = model.target.name;
  NarrativeDoc doc;
  doc.kind = family;
  doc.subject = surface;
  doc.template_version = templates.version;
  doc.edits = edits;

  const auto n = model.n();
  std::vector<double> beta(n), data_scale(n);
  for (std::size_t i = 0; i < n; ++i) {
    beta[i] = model.coefficients(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    data_scale[i] = patterns::data_scale_coefficient(model, i, j);
  }
  const auto split = patterns::split_significant(beta, mask);
  const std::set<std::string> isolated(clusters.isolated.begin(), clusters.isolated.end());

  auto base = [&]() {
    json b = {{"dependent", dependent}};
    if (!intercept) b["feature"] = surface;
    return b;
  };

  if (split.positive.empty() && split.negative.empty()) {
    auto p = make("coef:" + surface + "/none", family + ".none", base());
    p.trigger = json::object();
    render(p, templates, doc.edits);
    doc.paragraphs.push_back(std::move(p));
    return doc;
  }

  for (auto sign : {patterns::Sign::positive, patterns::Sign::negative}) {
    const auto& idx = sign == patterns::Sign::positive ? split.positive : split.negative;
    if (idx.empty()) continue;
    const auto& list = sign == patterns::Sign::positive ? clusters.positive_clusters : clusters.negative_clusters;
    const std::string sname(patterns::to_string(sign));
    const auto [lo, hi] = range_of(data_scale, idx);
    const auto [slo, shi] = range_of(beta, idx);
    json b = base();
    b["count"] = idx.size();
    b["clusters"] = list.size();
    b["min"] = jsonio::encode(lo);
    b["max"] = jsonio::encode(hi);
    b["_standardized"] = {{"min", jsonio::encode(slo)}, {"max", jsonio::encode(shi)}};
    auto overview = make("coef:" + surface + "/" + sname, family + ".overview." + sname, std::move(b), ids_of(model.region_ids, idx));
    render(overview, templates, doc.edits);

    for (const auto& c : list) {
      json cb = base();
      cb["count"] = c.size();
      cb["mean"] = jsonio::encode(c.mean_coefficient);
      cb["_standardized"] = {{"mean", jsonio::encode(c.mean_standardized)}};
      auto child = make("coef:" + c.id, family + ".cluster", std::move(cb), c.region_ids, c.location_identifier);
      child.trigger = {{"cluster_id", c.id}};
      render(child, templates, doc.edits);
      overview.children.push_back(std::move(child));
    }
    std::vector<std::string> lonely;
    for (auto i : idx) {
      if (isolated.contains(model.region_ids[i])) lonely.push_back(model.region_ids[i]);
    }
    if (!lonely.empty()) {
      json ib = {{"count", lonely.size()}, {"regions", lonely}};
      auto child = make("coef:" + surface + "/" + sname + "/isolated", family + ".isolated", std::move(ib), lonely);
      render(child, templates, doc.edits);
      overview.children.push_back(std::move(child));
    }
    doc.paragraphs.push_back(std::move(overview));
  }
  return doc;
}

NarrativeDoc apply_identifier_edit(const NarrativeDoc& doc, const std::string& paragraph_id, const std::string& label,
                                   const TemplateSet& templates) {
  NarrativeDoc out = doc;
  auto* p = find_mut(out.paragraphs, paragraph_id);
  if (!p) throw Error(ErrorCode::not_found, "no paragraph '" + paragraph_id + "'", {{"paragraph", paragraph_id}});
  if (p->default_location.empty()) {
    throw Error(ErrorCode::invalid_argument, "paragraph '" + paragraph_id + "' has no location identifier",
                {{"paragraph", paragraph_id}});
  }
  if (label.empty()) out.edits.erase(paragraph_id);
  else out.edits[paragraph_id] = label;
  render(*p, templates, out.edits);
  return out;
}

namespace {

json paragraph_json(const Paragraph& p) {
  json children = json::array();
  for (const auto& c : p.children) children.push_back(paragraph_json(c));
  return {{"id", p.id},
          {"template_id", p.template_id},
          {"bindings", p.bindings},
          {"default_location", p.default_location},
          {"pattern_html", p.pattern_html},
          {"explanation_html", p.explanation_html},
          {"text", p.text},
          {"anchors", p.anchors},
          {"trigger", p.trigger},
          {"children", children}};
}

Paragraph paragraph_from(const json& j) {
  using jsonio::require;
  Paragraph p;
  p.id = require(j, "id").get<std::string>();
  p.template_id = require(j, "template_id").get<std::string>();
  p.bindings = require(j, "bindings");
  p.default_location = require(j, "default_location").get<std::string>();
  p.pattern_html = require(j, "pattern_html").get<std::string>();
  p.explanation_html = require(j, "explanation_html").get<std::string>();
  p.text = require(j, "text").get<std::string>();
  p.anchors = require(j, "anchors").get<std::vector<std::string>>();
  p.trigger = require(j, "trigger");
  for (const auto& c : require(j, "children")) p.children.push_back(paragraph_from(c));
  return p;
}

void html_of(const Paragraph& p, std::string& out) {
  std::string anchors;
  for (const auto& a : p.anchors) anchors += (anchors.empty() ? "" : " ") + escape(a);
  out += "<p class=\"narrative-paragraph\" id=\"" + escape(p.id) + "\" data-anchors=\"" + anchors + "\">";
  out += "<span class=\"pattern\">" + p.pattern_html + "</span> <span class=\"explanation\">" + p.explanation_html + "</span></p>\n";
  if (!p.children.empty()) {
    out += "<ul class=\"sub-paragraphs\">\n";
    for (const auto& c : p.children) {
      out += "<li>";
      html_of(c, out);
      out += "</li>\n";
    }
    out += "</ul>\n";
  }
}

}  // namespace

json to_json(const NarrativeDoc& d) {
  json paragraphs = json::array();
  for (const auto& p : d.paragraphs) paragraphs.push_back(paragraph_json(p));
  return {{"kind", d.kind},
          {"subject", d.subject},
          {"template_version", d.template_version},
          {"paragraphs", paragraphs},
          {"edits", d.edits},
          {"notes", d.notes}};
}

NarrativeDoc narrative_from_json(const json& j) {
  using jsonio::require;
  try {
    NarrativeDoc d;
    d.kind = require(j, "kind").get<std::string>();
    d.subject = require(j, "subject").get<std::string>();
    d.template_version = require(j, "template_version").get<std::string>();
    for (const auto& p : require(j, "paragraphs")) d.paragraphs.push_back(paragraph_from(p));
    d.edits = require(j, "edits").get<std::map<std::string, std::string>>();
    d.notes = require(j, "notes").get<std::vector<std::string>>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed narrative: ") + e.what());
  }
}

std::string to_html(const NarrativeDoc& d) {
  std::string out = "<section class=\"narrative\" data-kind=\"" + escape(d.kind) + "\" data-subject=\"" + escape(d.subject) +
                    "\" data-template-version=\"" + escape(d.template_version) + "\">\n";
  for (const auto& p : d.paragraphs) html_of(p, out);
  for (const auto& note : d.notes) out += "<p class=\"coverage-note\">" + escape(note) + "</p>\n";
  out += "</section>\n";
  return out;
}

}  // namespace geolens::narrative
