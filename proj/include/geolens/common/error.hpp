#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace geolens {

/// Machine-readable error categories. The string form is what the CLI and
/// the HTTP service emit in their error payloads.
enum class ErrorCode {
  parse,
  empty_input,
  unsupported_geometry,
  out_of_range,
  degenerate_distribution,
  transform_domain,
  undefined_correlation,
  degenerate_variable,
  singular_design,
  local_singularity,
  bandwidth_search,
  convergence,
  oversaturated_model,
  undefined_statistic,
  not_found,
  invalid_argument,
  integrity,
  version,
  export_error,
  fetch,
  cancelled,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

}  // namespace geolens
