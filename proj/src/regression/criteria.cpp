#include "geolens/regression/criteria.hpp"

#include <cmath>
#include <numbers>

#include "geolens/common/error.hpp"

namespace geolens::regression {

double gaussian_log_likelihood(double rss, std::size_t n) {
  const double nd = static_cast<double>(n);
  return -0.5 * nd * (std::log(2.0 * std::numbers::pi) + std::log(rss / nd) + 1.0);
}

double aicc(double rss, std::size_t n, double k) {
  const double nd = static_cast<double>(n);
  if (nd - k - 1.0 <= 0.0) {
    throw Error(ErrorCode::oversaturated_model, "model is oversaturated (n - k - 1 <= 0)", {{"n", n}, {"k", k}});
  }
  const double aic = 2.0 * k - 2.0 * gaussian_log_likelihood(rss, n);
  return aic + 2.0 * k * (k + 1.0) / (nd - k - 1.0);
}

}  // namespace geolens::regression
