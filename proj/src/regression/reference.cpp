#include "geolens/regression/reference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "geolens/regression/kernel.hpp"

namespace geolens::regression::reference {

Eigen::MatrixXd distance_matrix(std::span<const dataset::PlanarPoint> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dx = points[static_cast<std::size_t>(i)].x - points[static_cast<std::size_t>(j)].x;
      const double dy = points[static_cast<std::size_t>(i)].y - points[static_cast<std::size_t>(j)].y;
      d(i, j) = std::hypot(dx, dy);
    }
  }
  return d;
}

Eigen::MatrixXd weight_matrix(const Eigen::MatrixXd& distances, double bandwidth, Kernel kernel, BandwidthMode mode) {
  const auto n = distances.rows();
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double b = bandwidth;
    if (mode == BandwidthMode::adaptive) {
      std::vector<double> row(distances.row(i).begin(), distances.row(i).end());
      std::sort(row.begin(), row.end());
      const auto k = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(bandwidth - 1e-9)), 1, n);
      b = row[static_cast<std::size_t>(k - 1)] * kAdaptiveInflation;
    }
    for (Eigen::Index j = 0; j < n; ++j) w(i, j) = kernel_weight(distances(i, j), b, kernel);
  }
  return w;
}

DenseGwr gwr_dense(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& weights) {
  const auto n = X.rows();
  const auto k = X.cols();
  DenseGwr out;
  out.coefficients.resize(n, k);
  out.hat.resize(n, n);
  out.local_se.resize(n, k);
  Eigen::MatrixXd var(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd w = weights.row(i).transpose();
    const Eigen::MatrixXd xtw = X.transpose() * w.asDiagonal();
    const Eigen::MatrixXd a_inv = (xtw * X).inverse();
    const Eigen::MatrixXd c = a_inv * xtw;  // k x n
    out.coefficients.row(i) = (c * y).transpose();
    out.hat.row(i) = X.row(i) * c;
    var.row(i) = (c * c.transpose()).diagonal().transpose();
  }
  out.fitted = out.hat * y;
  out.trace = out.hat.trace();
  out.sigma2 = (y - out.fitted).squaredNorm() / (static_cast<double>(n) - out.trace);
  out.local_se = (out.sigma2 * var.array()).sqrt().matrix();
  return out;
}

}  // namespace geolens::regression::reference
