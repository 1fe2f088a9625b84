#include "geolens/regression/gwr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "geolens/common/error.hpp"
#include "geolens/regression/criteria.hpp"
#include "geolens/regression/kernel.hpp"

namespace geolens::regression {

namespace {

struct LocalResult {
  Eigen::VectorXd beta;
  double hat_ii = 0.0;
  Eigen::VectorXd variance_factor;  // diag(A^-1 B A^-1), multiply by sigma^2
};

// Weighted least squares at one location via a pivoting QR of sqrt(W) X.
LocalResult solve_location(const Design& design, std::size_t i, const std::vector<std::uint32_t>& ids,
                           const std::vector<double>& weights, bool with_variance) {
  const auto k = design.X.cols();
  const auto m = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd xw(m, k);
  Eigen::VectorXd yw(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const double s = std::sqrt(weights[static_cast<std::size_t>(r)]);
    xw.row(r) = s * design.X.row(ids[static_cast<std::size_t>(r)]);
    yw[r] = s * design.y[ids[static_cast<std::size_t>(r)]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    const auto positive = std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
    throw Error(ErrorCode::local_singularity,
                "singular local system at region '" + design.region_ids[i] + "' with " + std::to_string(positive) +
                    " neighbours in bandwidth",
                {{"region_id", design.region_ids[i]}, {"neighbors", positive}, {"rank", qr.rank()}});
  }
  LocalResult out;
  out.beta = qr.solve(yw);
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd a_inv = qr.colsPermutation() * (r_inv * r_inv.transpose()) * qr.colsPermutation().transpose();
  const Eigen::VectorXd xi = design.X.row(static_cast<Eigen::Index>(i)).transpose();
  out.hat_ii = xi.dot(a_inv * xi);  // self weight is kernel(0) = 1
  if (with_variance) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index r2 = 0; r2 < m; ++r2) b.noalias() += weights[static_cast<std::size_t>(r2)] * xw.row(r2).transpose() * xw.row(r2);
    out.variance_factor = (a_inv * b * a_inv).diagonal();
  }
  return out;
}

struct LocationPass {
  Eigen::MatrixXd beta;
  Eigen::VectorXd hat_diag;
  Eigen::MatrixXd variance_factor;
};

LocationPass run_locations(const Design& design, const dataset::NeighborIndex& index, const LocalKernel& k,
                           double bandwidth, bool with_variance) {
  const auto n = static_cast<std::ptrdiff_t>(design.n());
  const auto cols = design.X.cols();
  LocationPass pass;
  pass.beta.resize(n, cols);
  pass.hat_diag.resize(n);
  if (with_variance) pass.variance_factor.resize(n, cols);
  std::vector<std::optional<Error>> errors(static_cast<std::size_t>(n));

#pragma omp parallel
  {
    std::vector<std::uint32_t> ids;
    std::vector<double> weights;
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      try {
        local_support(index, u, bandwidth, k, ids, weights);
        auto res = solve_location(design, u, ids, weights, with_variance);
        pass.beta.row(i) = res.beta.transpose();
        pass.hat_diag[i] = res.hat_ii;
        if (with_variance) pass.variance_factor.row(i) = res.variance_factor.transpose();
      } catch (const Error& e) {
        errors[u] = e;
      }
    }
  }
  for (auto& e : errors) {
    if (e) throw *e;
  }
  return pass;
}

}  // namespace

double location_bandwidth(const dataset::NeighborIndex& index, std::size_t i, double bandwidth, BandwidthMode mode) {
  if (mode == BandwidthMode::fixed) return bandwidth;
  const auto n = index.size();
  const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(bandwidth - 1e-9)), 1, n);
  return std::max(index.kth_with_self(i, k) * kAdaptiveInflation, std::numeric_limits<double>::min());
}

void local_support(const dataset::NeighborIndex& index, std::size_t i, double bandwidth, const LocalKernel& k,
                   std::vector<std::uint32_t>& ids, std::vector<double>& weights) {
  ids.clear();
  weights.clear();
  const double b = location_bandwidth(index, i, bandwidth, k.mode);
  const auto dist = index.distances(i);
  const auto order = index.order(i);
  for (std::size_t r = 0; r < dist.size(); ++r) {
    if (k.kernel != Kernel::gaussian && dist[r] >= b) break;
    const double w = kernel_weight(dist[r], b, k.kernel);
    if (w <= 0.0) continue;
    ids.push_back(order[r]);
    weights.push_back(w);
  }
}

GwrScore gwr_score(const Design& design, const dataset::NeighborIndex& index, const LocalKernel& k, double bandwidth) {
  const auto pass = run_locations(design, index, k, bandwidth, false);
  GwrScore s;
  const Eigen::VectorXd fitted = (design.X.array() * pass.beta.array()).rowwise().sum();
  s.rss = (design.y - fitted).squaredNorm();
  s.trace = pass.hat_diag.sum();
  try {
    s.aicc = aicc(s.rss, design.n(), s.trace);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::oversaturated_model) throw;
    s.aicc = std::numeric_limits<double>::infinity();
  }
  return s;
}

CalibratedModel gwr_fit(const Design& design, const dataset::NeighborIndex& index, const LocalKernel& k, double bandwidth) {
  if (!(bandwidth > 0.0)) throw Error(ErrorCode::invalid_argument, "bandwidth must be positive", {{"bandwidth", bandwidth}});
  const auto pass = run_locations(design, index, k, bandwidth, true);
  const auto n = design.n();
  CalibratedModel m;
  m.family = Family::gwr;
  m.kernel = k.kernel;
  m.bandwidth_mode = k.mode;
  m.surface_names = design.surface_names;
  m.region_ids = design.region_ids;
  m.rows = design.rows;
  m.coefficients = pass.beta;
  m.y = design.y;
  m.fitted = (design.X.array() * pass.beta.array()).rowwise().sum();
  m.residuals = design.y - m.fitted;
  m.hat_diag = pass.hat_diag;
  m.hat_trace = pass.hat_diag.sum();
  m.bandwidths = {bandwidth};
  m.enp_per_surface.assign(design.surfaces(), m.hat_trace / static_cast<double>(design.surfaces()));
  m.sigma2 = m.residuals.squaredNorm() / (static_cast<double>(n) - m.hat_trace);
  m.local_se = (m.sigma2 * pass.variance_factor.array()).sqrt().matrix();
  m.target = design.target;
  m.covariates = design.covariates;
  m.excluded_region_ids = design.excluded_region_ids;
  return m;
}

std::pair<double, double> search_range(const ModelSpec& spec, const dataset::NeighborIndex& index, std::size_t parameters) {
  const auto n = index.size();
  if (spec.bandwidth_mode == BandwidthMode::adaptive) {
    return {spec.search_lo.value_or(static_cast<double>(parameters + 1)), spec.search_hi.value_or(static_cast<double>(n))};
  }
  double lo = 0.0;
  const auto kmin = std::min(parameters + 1, n);
  for (std::size_t i = 0; i < n; ++i) lo = std::max(lo, index.kth_with_self(i, kmin));
  return {spec.search_lo.value_or(lo * kAdaptiveInflation), spec.search_hi.value_or(index.max_distance() * kAdaptiveInflation)};
}

GoldenResult select_gwr_bandwidth(const Design& design, const dataset::NeighborIndex& index, const ModelSpec& spec,
                                  const ProgressFn& progress) {
  const LocalKernel k{spec.kernel, spec.bandwidth_mode};
  if (spec.bandwidth) {
    GoldenResult fixed;
    fixed.bandwidth = *spec.bandwidth;
    fixed.score = gwr_score(design, index, k, *spec.bandwidth).aicc;
    fixed.evaluations.emplace(fixed.bandwidth, fixed.score);
    return fixed;
  }
  const auto [lo, hi] = search_range(spec, index, design.surfaces());
  int probes = 0;
  return golden_bandwidth(lo, hi, spec.bandwidth_mode == BandwidthMode::adaptive, [&](double bw) {
    const double score = gwr_score(design, index, k, bw).aicc;
    if (progress && !progress({"bandwidth_search", ++probes, score, 0.0})) {
      throw Error(ErrorCode::cancelled, "calibration cancelled");
    }
    return score;
  });
}

}  // namespace geolens::regression
