#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geolens/regression/model.hpp"

namespace geolens::regression {

struct OlsFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  Eigen::VectorXd hat_diag;
  Eigen::VectorXd se;
  double sigma2 = 0.0;
};

/// Least squares through a column-pivoting QR. `names` labels columns in
/// singular-design errors.
OlsFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& names = {});

CalibratedModel ols_model(const Design& design);

}  // namespace geolens::regression
