#pragma once

#include <cstddef>

namespace geolens::regression {

/// Gaussian log-likelihood at the ML variance estimate RSS/n.
double gaussian_log_likelihood(double rss, std::size_t n);

/// AICc = AIC + 2k(k+1)/(n-k-1), AIC = 2k - 2 log L. Throws when n-k-1 <= 0.
double aicc(double rss, std::size_t n, double k);

}  // namespace geolens::regression
