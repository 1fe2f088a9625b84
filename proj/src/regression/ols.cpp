#include "geolens/regression/ols.hpp"

#include "geolens/common/error.hpp"

namespace geolens::regression {

OlsFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& names) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (n <= p) throw Error(ErrorCode::invalid_argument, "OLS needs more observations than parameters", {{"n", n}, {"p", p}});

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::vector<std::string> dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      const auto c = static_cast<std::size_t>(perm[k]);
      dependent.push_back(c < names.size() ? names[c] : "column " + std::to_string(c));
    }
    throw Error(ErrorCode::singular_design, "design matrix is rank deficient", {{"rank", qr.rank()}, {"columns", dependent}});
  }
  OlsFit fit;
  fit.coefficients = qr.solve(y);
  fit.fitted = X * fit.coefficients;
  fit.residuals = y - fit.fitted;
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  fit.hat_diag = q.rowwise().squaredNorm();
  fit.sigma2 = fit.residuals.squaredNorm() / static_cast<double>(n - p);

  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov_perm = r_inv * r_inv.transpose();
  const Eigen::MatrixXd cov = qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();
  fit.se = (fit.sigma2 * cov.diagonal()).cwiseSqrt();
  return fit;
}

CalibratedModel ols_model(const Design& design) {
  const auto fit = fit_ols(design.X, design.y, design.surface_names);
  const auto n = design.X.rows();
  const auto k = design.X.cols();
  CalibratedModel m;
  m.family = Family::ols;
  m.surface_names = design.surface_names;
  m.region_ids = design.region_ids;
  m.rows = design.rows;
  m.coefficients = fit.coefficients.transpose().replicate(n, 1);
  m.local_se = fit.se.transpose().replicate(n, 1);
  m.y = design.y;
  m.fitted = fit.fitted;
  m.residuals = fit.residuals;
  m.hat_diag = fit.hat_diag;
  m.hat_trace = static_cast<double>(k);
  m.enp_per_surface.assign(static_cast<std::size_t>(k), 1.0);
  m.sigma2 = fit.sigma2;
  m.target = design.target;
  m.covariates = design.covariates;
  m.excluded_region_ids = design.excluded_region_ids;
  return m;
}

}  // namespace geolens::regression
