#include "geolens/common/error.hpp"

namespace geolens {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::unsupported_geometry: return "unsupported_geometry";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::degenerate_distribution: return "degenerate_distribution";
    case ErrorCode::transform_domain: return "transform_domain";
    case ErrorCode::undefined_correlation: return "undefined_correlation";
    case ErrorCode::degenerate_variable: return "degenerate_variable";
    case ErrorCode::singular_design: return "singular_design";
    case ErrorCode::local_singularity: return "local_singularity";
    case ErrorCode::bandwidth_search: return "bandwidth_search";
    case ErrorCode::convergence: return "convergence";
    case ErrorCode::oversaturated_model: return "oversaturated_model";
    case ErrorCode::undefined_statistic: return "undefined_statistic";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::integrity: return "integrity_error";
    case ErrorCode::version: return "version_error";
    case ErrorCode::export_error: return "export_error";
    case ErrorCode::fetch: return "fetch_error";
    case ErrorCode::cancelled: return "cancelled";
  }
  return "unknown";
}

nlohmann::json Error::to_json() const {
  return {{"error", std::string(to_string(code_))}, {"message", what()}, {"details", details_}};
}

}  // namespace geolens
