#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "geolens/regression/model.hpp"

namespace geolens::regression {

inline double kernel_weight(double d, double b, Kernel kernel) {
  const double z = d / b;
  switch (kernel) {
    case Kernel::bisquare: {
      if (z >= 1.0) return 0.0;
      const double t = 1.0 - z * z;
      return t * t;
    }
    case Kernel::gaussian: return std::exp(-0.5 * z * z);
    case Kernel::boxcar: return z < 1.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

std::vector<double> kernel_weights(std::span<const double> distances, double bandwidth, Kernel kernel);

/// Adaptive bandwidths are scaled by this factor so the kth location itself
/// stays inside compact kernels.
inline constexpr double kAdaptiveInflation = 1.0 + 1e-7;

}  // namespace geolens::regression
