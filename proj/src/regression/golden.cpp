#include "geolens/regression/golden.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "geolens/common/error.hpp"

namespace geolens::regression {

namespace {

constexpr double kGoldenStep = 0.38197;  // 1 - 1/phi

}  // namespace

GoldenResult golden_bandwidth(double lo, double hi, bool integer, const std::function<double(double)>& evaluate) {
  if (!(lo < hi)) throw Error(ErrorCode::invalid_argument, "golden search needs lo < hi", {{"lo", lo}, {"hi", hi}});
  if (integer) {
    lo = std::ceil(lo);
    hi = std::floor(hi);
  }
  GoldenResult result;
  auto score = [&](double x) {
    if (integer) x = std::round(x);
    if (auto it = result.evaluations.find(x); it != result.evaluations.end()) return it->second;
    double s = 0.0;
    try {
      s = evaluate(x);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::cancelled) throw;
      throw Error(ErrorCode::bandwidth_search, "bandwidth evaluation failed at " + std::to_string(x) + ": " + e.what(),
                  {{"probe", x}, {"cause", e.to_json()}});
    }
    if (std::isnan(s)) s = std::numeric_limits<double>::infinity();
    result.evaluations.emplace(x, s);
    return s;
  };
  auto snap = [&](double x) { return integer ? std::round(x) : x; };

  const double tolerance = integer ? 3.0 : 1e-3 * (hi - lo);
  double a = lo, c = hi;
  double b = snap(a + kGoldenStep * (c - a));
  double d = snap(c - kGoldenStep * (c - a));
  for (int iter = 0; iter < 200 && (c - a) > tolerance; ++iter) {
    if (score(b) <= score(d)) {
      c = d;
      d = b;
      b = snap(a + kGoldenStep * (c - a));
    } else {
      a = b;
      b = d;
      d = snap(c - kGoldenStep * (c - a));
    }
  }

  std::vector<double> candidates{lo, hi, b, d};
  if (integer) {
    for (double x = std::ceil(a); x <= std::floor(c); x += 1.0) candidates.push_back(x);
  } else {
    candidates.push_back(0.5 * (a + c));
  }
  bool first = true;
  for (double x : candidates) {
    const double xs = snap(x);
    const double s = score(xs);
    if (first || s < result.score || (s == result.score && xs < result.bandwidth)) {
      result.bandwidth = xs;
      result.score = s;
      first = false;
    }
  }
  result.boundary = result.bandwidth == lo || result.bandwidth == hi;
  return result;
}

}  // namespace geolens::regression
