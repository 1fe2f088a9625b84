#include "geolens/report/report.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "geolens/common/digest.hpp"
#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"

namespace geolens::report {

using nlohmann::json;

std::string_view to_string(ItemKind k) {
  switch (k) {
    case ItemKind::paragraph: return "paragraph";
    case ItemKind::map_figure: return "map_figure";
    case ItemKind::chart_figure: return "chart_figure";
  }
  return "paragraph";
}

ItemKind item_kind_from_string(std::string_view s) {
  if (s == "paragraph") return ItemKind::paragraph;
  if (s == "map_figure") return ItemKind::map_figure;
  if (s == "chart_figure") return ItemKind::chart_figure;
  throw Error(ErrorCode::invalid_argument, "unknown report item kind '" + std::string(s) + "'");
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::add: return "add";
    case Action::edit: return "edit";
    case Action::remove: return "delete";
    case Action::move_up: return "move_up";
    case Action::move_down: return "move_down";
  }
  return "add";
}

Action action_from_string(std::string_view s) {
  if (s == "add") return Action::add;
  if (s == "edit") return Action::edit;
  if (s == "delete") return Action::remove;
  if (s == "move_up") return Action::move_up;
  if (s == "move_down") return Action::move_down;
  throw Error(ErrorCode::invalid_argument, "unknown report action '" + std::string(s) + "'");
}

const std::vector<std::string>& color_schemes() {
  static const std::vector<std::string> schemes = {"viridis", "cividis", "magma", "blues",  "greens",
                                                   "oranges", "purples", "reds",  "rdbu",   "brbg",
                                                   "piyg",    "spectral"};
  return schemes;
}

namespace {

std::string escape(std::string_view s) {
  std::string out;
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

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

const std::set<std::string>& allowed_tags() {
  static const std::set<std::string> tags = {"b",  "strong", "i",    "em",  "u",    "s",     "sub", "sup",
                                             "br", "span",   "p",    "ul",  "ol",   "li",    "mark", "code",
                                             "small", "del", "ins", "blockquote", "div", "h2", "h3", "h4"};
  return tags;
}

const std::set<std::string>& dropped_with_content() {
  static const std::set<std::string> tags = {"script", "style", "iframe", "object", "embed",
                                             "template", "noscript", "textarea", "title", "svg", "math"};
  return tags;
}

bool safe_style(std::string_view value) {
  const auto v = lower(value);
  for (const char* bad : {"expression", "url(", "javascript", "@import", "behavior", "<", "\\"}) {
    if (v.find(bad) != std::string::npos) return false;
  }
  return true;
}

// Escapes text while keeping well-formed character references.
void append_text(std::string& out, std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '&') {
      std::size_t j = i + 1;
      if (j < s.size() && s[j] == '#') ++j;
      const auto start = j;
      while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j])) && j - start < 32) ++j;
      if (j > start && j < s.size() && s[j] == ';') {
        out.append(s.substr(i, j - i + 1));
        i = j;
      } else {
        out += "&amp;";
      }
    } else if (c == '<') {
      out += "&lt;";
    } else if (c == '>') {
      out += "&gt;";
    } else {
      out += c;
    }
  }
}

}  // namespace

std::string sanitize_markup(std::string_view html) {
  std::string out;
  std::vector<std::string> open;
  std::size_t i = 0;
  while (i < html.size()) {
    const auto lt = html.find('<', i);
    append_text(out, html.substr(i, lt == std::string_view::npos ? std::string_view::npos : lt - i));
    if (lt == std::string_view::npos) break;
    i = lt;
    if (html.substr(i, 4) == "<!--") {
      const auto end = html.find("-->", i + 4);
      i = end == std::string_view::npos ? html.size() : end + 3;
      continue;
    }
    std::size_t j = i + 1;
    const bool closing = j < html.size() && html[j] == '/';
    if (closing) ++j;
    const auto name_start = j;
    while (j < html.size() && std::isalnum(static_cast<unsigned char>(html[j]))) ++j;
    if (j == name_start) {
      out += "&lt;";
      ++i;
      continue;
    }
    const auto name = lower(html.substr(name_start, j - name_start));
    std::vector<std::pair<std::string, std::string>> attrs;
    while (j < html.size() && html[j] != '>') {
      if (std::isspace(static_cast<unsigned char>(html[j])) || html[j] == '/') {
        ++j;
        continue;
      }
      const auto a = j;
      while (j < html.size() && !std::isspace(static_cast<unsigned char>(html[j])) && html[j] != '=' &&
             html[j] != '>' && html[j] != '/') {
        ++j;
      }
      auto key = lower(html.substr(a, j - a));
      std::string value;
      while (j < html.size() && std::isspace(static_cast<unsigned char>(html[j]))) ++j;
      if (j < html.size() && html[j] == '=') {
        ++j;
        while (j < html.size() && std::isspace(static_cast<unsigned char>(html[j]))) ++j;
        if (j < html.size() && (html[j] == '"' || html[j] == '\'')) {
          const char q = html[j];
          const auto end = html.find(q, j + 1);
          const auto stop = end == std::string_view::npos ? html.size() : end;
          value = html.substr(j + 1, stop - j - 1);
          j = end == std::string_view::npos ? html.size() : end + 1;
        } else {
          const auto v = j;
          while (j < html.size() && !std::isspace(static_cast<unsigned char>(html[j])) && html[j] != '>') ++j;
          value = html.substr(v, j - v);
        }
      }
      if (key.empty()) ++j;
      else attrs.emplace_back(std::move(key), std::move(value));
    }
    i = j < html.size() ? j + 1 : html.size();

    if (!closing && dropped_with_content().contains(name)) {
      const auto end = lower(html.substr(i)).find("</" + name);
      if (end == std::string::npos) {
        i = html.size();
      } else {
        const auto gt = html.find('>', i + end);
        i = gt == std::string_view::npos ? html.size() : gt + 1;
      }
      continue;
    }
    if (!allowed_tags().contains(name)) continue;
    if (closing) {
      const auto it = std::find(open.rbegin(), open.rend(), name);
      if (it == open.rend()) continue;
      const auto depth = static_cast<std::size_t>(std::distance(open.rbegin(), it)) + 1;
      for (std::size_t k = 0; k < depth; ++k) {
        out += "</" + open.back() + ">";
        open.pop_back();
      }
      continue;
    }
    out += "<" + name;
    for (const auto& [k, v] : attrs) {
      const bool inert = k == "class" || k == "id" || (k.starts_with("data-") && k.size() > 5 &&
                                                                 std::all_of(k.begin(), k.end(), [](char c) {
                                                                   return std::islower(static_cast<unsigned char>(c)) ||
                                                                          std::isdigit(static_cast<unsigned char>(c)) || c == '-';
                                                                 }));
      if (inert || (k == "style" && safe_style(v))) out += " " + k + "=\"" + escape(v) + "\"";
    }
    out += ">";
    if (name != "br") open.push_back(name);
  }
  while (!open.empty()) {
    out += "</" + open.back() + ">";
    open.pop_back();
  }
  return out;
}

void validate_item(const ReportItem& item) {
  if (item.kind == ItemKind::paragraph) {
    if (blank(item.content)) throw Error(ErrorCode::invalid_argument, "paragraph content is empty");
    return;
  }
  if (item.asset_id.empty()) {
    throw Error(ErrorCode::invalid_argument, "figure item has no asset reference", {{"item", item.id}});
  }
  const auto& schemes = color_schemes();
  if (std::find(schemes.begin(), schemes.end(), item.color_scheme) == schemes.end()) {
    throw Error(ErrorCode::invalid_argument, "unknown color scheme '" + item.color_scheme + "'",
                {{"color_scheme", item.color_scheme}, {"allowed", schemes}});
  }
}

namespace {

std::size_t index_of(const Report& r, const json& payload) {
  if (!payload.contains("index") || !payload["index"].is_number_integer()) {
    throw Error(ErrorCode::invalid_argument, "payload needs an integer index");
  }
  const auto i = payload["index"].get<long long>();
  if (i < 0 || static_cast<std::size_t>(i) >= r.items.size()) {
    throw Error(ErrorCode::not_found, "report has no item at index " + std::to_string(i),
                {{"index", i}, {"size", r.items.size()}});
  }
  return static_cast<std::size_t>(i);
}

}  // namespace

Mutation mutate_report(const Report& report, Action action, const json& payload, const std::string& timestamp) {
  Mutation m{report, false};
  auto& r = m.report;
  switch (action) {
    case Action::add: {
      if (!payload.contains("item")) throw Error(ErrorCode::invalid_argument, "add needs an item");
      auto src = payload["item"];
      src["id"] = "item-" + std::to_string(r.next_item);
      if (!src.contains("color_scheme") && src.value("kind", "paragraph") != "paragraph") src["color_scheme"] = "viridis";
      auto item = item_from_json(src);
      item.content = sanitize_markup(item.content);
      item.caption = sanitize_markup(item.caption);
      validate_item(item);
      std::size_t at = r.items.size();
      if (payload.contains("index")) {
        const auto i = payload["index"].get<long long>();
        if (i < 0 || static_cast<std::size_t>(i) > r.items.size()) {
          throw Error(ErrorCode::not_found, "cannot insert at index " + std::to_string(i), {{"index", i}});
        }
        at = static_cast<std::size_t>(i);
      }
      r.items.insert(r.items.begin() + static_cast<std::ptrdiff_t>(at), std::move(item));
      ++r.next_item;
      break;
    }
    case Action::edit: {
      auto& item = r.items[index_of(r, payload)];
      if (payload.contains("content")) item.content = sanitize_markup(payload["content"].get<std::string>());
      if (payload.contains("caption")) item.caption = sanitize_markup(payload["caption"].get<std::string>());
      if (payload.contains("color_scheme")) item.color_scheme = payload["color_scheme"].get<std::string>();
      validate_item(item);
      break;
    }
    case Action::remove:
      r.items.erase(r.items.begin() + static_cast<std::ptrdiff_t>(index_of(r, payload)));
      break;
    case Action::move_up: {
      const auto i = index_of(r, payload);
      if (i == 0) m.noop = true;
      else std::swap(r.items[i], r.items[i - 1]);
      break;
    }
    case Action::move_down: {
      const auto i = index_of(r, payload);
      if (i + 1 == r.items.size()) m.noop = true;
      else std::swap(r.items[i], r.items[i + 1]);
      break;
    }
  }
  if (!m.noop && !timestamp.empty()) r.modified_at = timestamp;
  return m;
}

std::vector<std::string> unresolved_assets(const Report& report, const AssetMap& assets) {
  std::vector<std::string> out;
  for (const auto& item : report.items) {
    if (item.kind != ItemKind::paragraph && !assets.contains(item.asset_id)) out.push_back(item.asset_id);
  }
  return out;
}

namespace {

constexpr std::string_view kStyle = R"(body{font-family:Georgia,'Times New Roman',serif;color:#222;margin:0;background:#fff}
article.report{max-width:46rem;margin:2rem auto;padding:0 1.5rem;line-height:1.55}
h1{font-size:1.8rem;margin-bottom:.25rem}
.meta{color:#666;font-size:.85rem;margin-top:0}
.item{margin:1.2rem 0}
.item .ref{font-size:.7rem;color:#777;margin-left:.2rem}
figure.item{text-align:center}
figure.item img{max-width:100%;height:auto;border:1px solid #ddd}
figcaption{font-size:.9rem;color:#444;margin-top:.4rem}
span.num{font-variant-numeric:tabular-nums}
span.loc{font-weight:600}
footer.provenance{border-top:1px solid #ccc;margin-top:2rem;padding-top:.5rem;font-size:.8rem;color:#555}
@media print{body{font-size:11pt}article.report{max-width:none;margin:0;padding:0}
figure.item{page-break-inside:avoid;break-inside:avoid}h1{page-break-after:avoid}
footer.provenance{page-break-before:auto}a{color:inherit;text-decoration:none}}
@page{size:A4;margin:18mm}
)";

}  // namespace

std::string export_html(const Report& report, const AssetMap& assets) {
  const auto missing = unresolved_assets(report, assets);
  if (!missing.empty()) {
    throw Error(ErrorCode::export_error, "report references unknown assets", {{"unresolved", missing}});
  }
  for (const auto& item : report.items) {
    if (item.kind == ItemKind::paragraph) continue;
    const auto& type = assets.at(item.asset_id).media_type;
    if (type.rfind("image/", 0) != 0) {
      throw Error(ErrorCode::export_error, "asset '" + item.asset_id + "' is not an image", {{"asset", item.asset_id}, {"media_type", type}});
    }
  }
  std::string out = "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>" +
                    escape(report.title) + "</title>\n<style>\n" + std::string(kStyle) + "</style>\n</head>\n<body>\n";
  out += "<article class=\"report\">\n<h1>" + escape(report.title) + "</h1>\n";
  if (!report.created_at.empty() || !report.template_version.empty()) {
    out += "<p class=\"meta\">";
    if (!report.created_at.empty()) out += "Created " + escape(report.created_at);
    if (!report.modified_at.empty()) out += ", modified " + escape(report.modified_at);
    if (!report.template_version.empty()) {
      out += (report.created_at.empty() ? "" : ". ") + std::string("Template version ") + escape(report.template_version);
    }
    out += "</p>\n";
  }

  std::vector<std::string> notes;
  for (const auto& item : report.items) {
    const auto& p = item.provenance;
    std::string ref;
    if (!p.module.empty() || !p.state_hash.empty()) {
      std::string note = "Source: " + escape(p.module.empty() ? "manual" : p.module);
      if (!p.state_hash.empty()) note += "; state <code>" + escape(p.state_hash) + "</code>";
      if (!p.template_version.empty()) note += "; templates " + escape(p.template_version);
      notes.push_back(note);
      const auto n = std::to_string(notes.size());
      ref = "<sup class=\"ref\"><a href=\"#ref-" + n + "\">[" + n + "]</a></sup>";
    }
    const auto kind = std::string(to_string(item.kind));
    if (item.kind == ItemKind::paragraph) {
      out += "<section class=\"item paragraph\" id=\"" + escape(item.id) + "\"><div class=\"content\">" +
             sanitize_markup(item.content) + ref + "</div></section>\n";
    } else {
      const auto& asset = assets.at(item.asset_id);
      out += "<figure class=\"item " + kind + "\" id=\"" + escape(item.id) + "\" data-color-scheme=\"" +
             escape(item.color_scheme) + "\"><img alt=\"" + escape(item.caption) + "\" src=\"data:" +
             escape(asset.media_type) + ";base64," + base64_encode(asset.bytes) + "\">";
      out += "<figcaption>" + sanitize_markup(item.caption) + ref + "</figcaption></figure>\n";
    }
  }
  if (!notes.empty()) {
    out += "<footer class=\"provenance\">\n<ol>\n";
    for (std::size_t i = 0; i < notes.size(); ++i) {
      out += "<li id=\"ref-" + std::to_string(i + 1) + "\">" + notes[i] + "</li>\n";
    }
    out += "</ol>\n</footer>\n";
  }
  out += "</article>\n</body>\n</html>\n";
  return out;
}

json to_json(const ReportItem& item) {
  json j = {{"id", item.id}, {"kind", to_string(item.kind)}, {"content", item.content}, {"caption", item.caption},
            {"provenance",
             {{"module", item.provenance.module},
              {"state_hash", item.provenance.state_hash},
              {"template_version", item.provenance.template_version}}}};
  if (item.kind != ItemKind::paragraph) {
    j["asset_id"] = item.asset_id;
    j["color_scheme"] = item.color_scheme;
  }
  return j;
}

ReportItem item_from_json(const json& j) {
  try {
    ReportItem item;
    item.id = j.value("id", std::string{});
    item.kind = item_kind_from_string(j.value("kind", std::string("paragraph")));
    item.content = j.value("content", std::string{});
    item.caption = j.value("caption", std::string{});
    item.asset_id = j.value("asset_id", std::string{});
    item.color_scheme = j.value("color_scheme", std::string{});
    if (j.contains("provenance")) {
      const auto& p = j["provenance"];
      item.provenance = {p.value("module", std::string{}), p.value("state_hash", std::string{}),
                         p.value("template_version", std::string{})};
    }
    return item;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed report item: ") + e.what());
  }
}

json to_json(const Report& r) {
  json items = json::array();
  for (std::size_t i = 0; i < r.items.size(); ++i) {
    auto j = to_json(r.items[i]);
    j["index"] = i;
    items.push_back(std::move(j));
  }
  return {{"title", r.title},           {"created_at", r.created_at}, {"modified_at", r.modified_at},
          {"template_version", r.template_version}, {"next_item", r.next_item}, {"items", items}};
}

Report report_from_json(const json& j) {
  using jsonio::require;
  try {
    Report r;
    r.title = require(j, "title").get<std::string>();
    r.created_at = j.value("created_at", std::string{});
    r.modified_at = j.value("modified_at", std::string{});
    r.template_version = j.value("template_version", std::string{});
    r.next_item = j.value("next_item", std::uint64_t{1});
    std::set<std::string> ids;
    for (const auto& item : require(j, "items")) {
      const auto index = require(item, "index").get<std::size_t>();
      if (index != r.items.size()) {
        throw Error(ErrorCode::integrity, "report item indices are not contiguous from 0",
                    {{"expected", r.items.size()}, {"found", index}});
      }
      auto parsed = item_from_json(item);
      validate_item(parsed);
      if (parsed.id.empty() || !ids.insert(parsed.id).second) {
        throw Error(ErrorCode::integrity, "report item id '" + parsed.id + "' is missing or repeated", {{"item", parsed.id}});
      }
      r.items.push_back(std::move(parsed));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed report: ") + e.what());
  }
}

json to_json(const Asset& a) { return {{"id", a.id}, {"media_type", a.media_type}, {"data", base64_encode(a.bytes)}}; }

Asset asset_from_json(const json& j) {
  using jsonio::require;
  try {
    return {require(j, "id").get<std::string>(), require(j, "media_type").get<std::string>(),
            base64_decode(require(j, "data").get<std::string>())};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed asset: ") + e.what());
  }
}

}  // namespace geolens::report
