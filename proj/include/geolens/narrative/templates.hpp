#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace geolens::narrative {

enum class Role { pattern_description, result_explanation };
enum class PlaceholderType { number, integer, text, location, regions };

struct Slot {
  Role role = Role::pattern_description;
  std::string text;
};

struct Template {
  std::string id;
  std::string kind;
  std::map<std::string, PlaceholderType> placeholders;
  std::vector<Slot> slots;
};

struct TemplateSet {
  std::string version;
  std::map<std::string, Template> templates;

  const Template& at(const std::string& id) const;
};

/// Parses and validates a template document. Undeclared placeholders,
/// unknown kinds or types, and templates missing a phrase role are rejected.
TemplateSet load_templates(std::string_view json_text);

/// The template set compiled into the library.
const TemplateSet& default_templates();

/// Three significant digits for prose.
std::string format_number(double v);

}  // namespace geolens::narrative
