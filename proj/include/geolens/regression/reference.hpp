#pragma once

#include <span>

#include <Eigen/Dense>

#include "geolens/dataset/table.hpp"
#include "geolens/regression/model.hpp"

// Serial dense implementations kept as the reference for the parallel
// kernels. They materialise full n x n weight matrices and use the normal
// equations directly, so they are only meant for small problems.
namespace geolens::regression::reference {

struct DenseGwr {
  Eigen::MatrixXd coefficients;
  Eigen::MatrixXd hat;  // full n x n hat matrix
  Eigen::VectorXd fitted;
  Eigen::MatrixXd local_se;
  double trace = 0.0;
  double sigma2 = 0.0;
};

Eigen::MatrixXd distance_matrix(std::span<const dataset::PlanarPoint> points);

/// n x n weights; row i holds location i's kernel.
Eigen::MatrixXd weight_matrix(const Eigen::MatrixXd& distances, double bandwidth, Kernel kernel, BandwidthMode mode);

DenseGwr gwr_dense(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& weights);

}  // namespace geolens::regression::reference
