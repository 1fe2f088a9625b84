#include "geolens/regression/kernel.hpp"

namespace geolens::regression {

std::vector<double> kernel_weights(std::span<const double> distances, double bandwidth, Kernel kernel) {
  std::vector<double> w(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) w[i] = kernel_weight(distances[i], bandwidth, kernel);
  return w;
}

}  // namespace geolens::regression
