#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace geolens::jsonio {

using nlohmann::json;

// JSON has no encoding for non-finite numbers; they travel as the strings
// "NaN", "Infinity" and "-Infinity".
json encode(double v);
double decode_double(const json& j);

json encode(const std::vector<double>& v);
std::vector<double> decode_vector(const json& j);

json encode(const Eigen::VectorXd& v);
Eigen::VectorXd decode_eigen_vector(const json& j);

/// Row-major nested arrays.
json encode(const Eigen::MatrixXd& m);
Eigen::MatrixXd decode_matrix(const json& j);

json encode_bits(const std::vector<bool>& bits);
std::vector<bool> decode_bits(const json& j);

json encode_mask(const std::vector<std::vector<bool>>& mask);
std::vector<std::vector<bool>> decode_mask(const json& j);

/// Sorted keys, no whitespace, shortest round-trip floats.
std::string canonical_dump(const json& j);

/// Fetches a required member or throws a parse error naming the path.
const json& require(const json& j, const char* key);

}  // namespace geolens::jsonio
