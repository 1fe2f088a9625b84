#pragma once

#include <functional>
#include <map>

namespace geolens::regression {

struct GoldenResult {
  double bandwidth = 0.0;
  double score = 0.0;
  bool boundary = false;
  std::map<double, double> evaluations;
};

/// Golden-section minimisation over [lo, hi]. Integer mode rounds probes and
/// finishes with an exhaustive scan once the bracket is a few units wide.
/// Endpoints are always scored; ties go to the smaller bandwidth. Evaluator
/// errors are rethrown as bandwidth-search errors carrying the probe.
GoldenResult golden_bandwidth(double lo, double hi, bool integer, const std::function<double(double)>& evaluate);

}  // namespace geolens::regression
