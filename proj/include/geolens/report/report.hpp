#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace geolens::report {

enum class ItemKind { paragraph, map_figure, chart_figure };
std::string_view to_string(ItemKind k);
ItemKind item_kind_from_string(std::string_view s);

/// Registered figure color schemes.
const std::vector<std::string>& color_schemes();

struct Provenance {
  std::string module;
  std::string state_hash;
  std::string template_version;
  bool operator==(const Provenance&) const = default;
};

struct ReportItem {
  std::string id;
  ItemKind kind = ItemKind::paragraph;
  std::string content;
  std::string asset_id;
  std::string color_scheme;
  std::string caption;
  Provenance provenance;

  bool operator==(const ReportItem&) const = default;
};

struct Report {
  std::string title = "Analysis report";
  std::string created_at;
  std::string modified_at;
  std::string template_version;
  std::uint64_t next_item = 1;
  std::vector<ReportItem> items;
};

struct Asset {
  std::string id;
  std::string media_type;
  std::string bytes;
};

using AssetMap = std::map<std::string, Asset>;

enum class Action { add, edit, remove, move_up, move_down };
std::string_view to_string(Action a);
Action action_from_string(std::string_view s);

struct Mutation {
  Report report;
  bool noop = false;
};

/// Payloads: add {"item": {...}, "index"?}; edit {"index", "content"?, "caption"?, "color_scheme"?};
/// delete/move_up/move_down {"index"}. `timestamp` becomes modified_at when non-empty.
Mutation mutate_report(const Report& report, Action action, const nlohmann::json& payload,
                       const std::string& timestamp = {});

/// Whitelisted formatting tags with class and style attributes; scripts and handlers are dropped.
std::string sanitize_markup(std::string_view html);

/// Figure items whose asset id is not in `assets`.
std::vector<std::string> unresolved_assets(const Report& report, const AssetMap& assets);

/// Self-contained HTML5 document; byte-identical for identical inputs.
std::string export_html(const Report& report, const AssetMap& assets);

nlohmann::json to_json(const ReportItem& item);
ReportItem item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Asset& a);
Asset asset_from_json(const nlohmann::json& j);

/// Throws invalid_argument when an item breaks the content or palette rules.
void validate_item(const ReportItem& item);

}  // namespace geolens::report
