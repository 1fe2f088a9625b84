#include "geolens/narrative/templates.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <set>

#include "geolens/common/error.hpp"

namespace geolens::narrative {

std::string_view embedded_templates();

namespace {

const std::set<std::string> kKinds{"feature", "correlation", "local_r2", "cooks_d", "std_residual", "coefficient", "intercept"};

PlaceholderType type_from(const std::string& s, const std::string& id) {
  if (s == "number") return PlaceholderType::number;
  if (s == "integer") return PlaceholderType::integer;
  if (s == "text") return PlaceholderType::text;
  if (s == "location") return PlaceholderType::location;
  if (s == "regions") return PlaceholderType::regions;
  throw Error(ErrorCode::parse, "template '" + id + "' declares unknown placeholder type '" + s + "'");
}

std::vector<std::string> placeholders_in(const std::string& text) {
  std::vector<std::string> out;
  for (std::size_t pos = text.find('{'); pos != std::string::npos; pos = text.find('{', pos + 1)) {
    const auto end = text.find('}', pos);
    if (end == std::string::npos) break;
    out.push_back(text.substr(pos + 1, end - pos - 1));
  }
  return out;
}

}  // namespace

const Template& TemplateSet::at(const std::string& id) const {
  auto it = templates.find(id);
  if (it == templates.end()) throw Error(ErrorCode::not_found, "no template '" + id + "'", {{"template", id}});
  return it->second;
}

TemplateSet load_templates(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("template document: ") + e.what(), {{"byte", e.byte}});
  }
  TemplateSet set;
  try {
    set.version = doc.at("version").get<std::string>();
    for (const auto& t : doc.at("templates")) {
      Template tpl;
      tpl.id = t.at("id").get<std::string>();
      tpl.kind = t.at("kind").get<std::string>();
      if (!kKinds.contains(tpl.kind)) throw Error(ErrorCode::parse, "template '" + tpl.id + "' has unknown kind '" + tpl.kind + "'");
      for (const auto& [name, type] : t.at("placeholders").items()) tpl.placeholders[name] = type_from(type.get<std::string>(), tpl.id);
      bool pattern = false, explanation = false;
      for (const auto& s : t.at("slots")) {
        Slot slot;
        const auto role = s.at("role").get<std::string>();
        if (role == "pattern_description") {
          slot.role = Role::pattern_description;
          pattern = true;
        } else if (role == "result_explanation") {
          slot.role = Role::result_explanation;
          explanation = true;
        } else {
          throw Error(ErrorCode::parse, "template '" + tpl.id + "' has unknown slot role '" + role + "'");
        }
        slot.text = s.at("text").get<std::string>();
        for (const auto& name : placeholders_in(slot.text)) {
          if (!tpl.placeholders.contains(name)) {
            throw Error(ErrorCode::parse, "template '" + tpl.id + "' uses undeclared placeholder '" + name + "'",
                        {{"template", tpl.id}, {"placeholder", name}});
          }
        }
        tpl.slots.push_back(std::move(slot));
      }
      if (!pattern || !explanation) {
        throw Error(ErrorCode::parse, "template '" + tpl.id + "' needs both a pattern description and a result explanation");
      }
      if (!set.templates.emplace(tpl.id, tpl).second) throw Error(ErrorCode::parse, "duplicate template id '" + tpl.id + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("template document: ") + e.what());
  }
  return set;
}

const TemplateSet& default_templates() {
  static const TemplateSet set = load_templates(embedded_templates());
  return set;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "undefined";
  if (std::isinf(v)) return v > 0 ? "infinite" : "negative infinite";
  if (v == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  const int exponent = std::atoi(std::strchr(buf, 'e') + 1);
  if (exponent < -3 || exponent >= 6) return buf;
  std::snprintf(buf, sizeof buf, "%.*f", std::max(0, 2 - exponent), v);
  return buf;
}

}  // namespace geolens::narrative
