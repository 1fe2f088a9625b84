#include "geolens/common/json_util.hpp"

#include <cmath>
#include <limits>

#include "geolens/common/error.hpp"

namespace geolens::jsonio {

json encode(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  return v;
}

double decode_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
  }
  throw Error(ErrorCode::parse, "expected a number, got " + j.dump());
}

json encode(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(encode(x));
  return out;
}

std::vector<double> decode_vector(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::parse, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(decode_double(x));
  return out;
}

json encode(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(encode(v[i]));
  return out;
}

Eigen::VectorXd decode_eigen_vector(const json& j) {
  auto v = decode_vector(j);
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json encode(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(encode(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd decode_matrix(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::parse, "expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::parse, "ragged matrix row " + std::to_string(r));
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = decode_double(row[static_cast<size_t>(c)]);
  }
  return m;
}

json encode_bits(const std::vector<bool>& bits) { return encode_mask({bits})[0]; }

std::vector<bool> decode_bits(const json& j) { return decode_mask(json::array({j}))[0]; }

json encode_mask(const std::vector<std::vector<bool>>& mask) {
  json out = json::array();
  for (const auto& row : mask) {
    std::string s;
    s.reserve(row.size());
    for (bool b : row) s.push_back(b ? '1' : '0');
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<bool>> decode_mask(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::parse, "expected a mask array");
  std::vector<std::vector<bool>> out;
  for (const auto& row : j) {
    const auto& s = row.get_ref<const std::string&>();
    std::vector<bool> bits;
    bits.reserve(s.size());
    for (char c : s) {
      if (c != '0' && c != '1') throw Error(ErrorCode::parse, "mask rows are 0/1 strings");
      bits.push_back(c == '1');
    }
    out.push_back(std::move(bits));
  }
  return out;
}

std::string canonical_dump(const json& j) { return j.dump(); }

const json& require(const json& j, const char* key) {
  if (!j.is_object()) throw Error(ErrorCode::parse, std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::parse, std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace geolens::jsonio
