#include "geolens/regression/mgwr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "geolens/common/error.hpp"
#include "geolens/regression/criteria.hpp"
#include "geolens/regression/kernel.hpp"

namespace geolens::regression {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One smoother application in the backfitting sequence. The first step is
// the full GWR initialisation (surface == npos).
struct Step {
  std::size_t surface;
  double bandwidth;
};

constexpr std::size_t kAllSurfaces = static_cast<std::size_t>(-1);

nlohmann::json trace_json(const std::vector<BackfitIteration>& trace) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : trace) out.push_back({{"iteration", t.iteration}, {"bandwidths", t.bandwidths}, {"soc", t.soc}, {"rss", t.rss}});
  return out;
}

// Hat-matrix bookkeeping. Each surface j keeps C_j with beta_j = C_j y; the
// recursion C_j <- P_j (I - S + diag(x_j) C_j) is column-separable, so the
// replay runs over column chunks to bound memory.
struct ReplayOutput {
  std::vector<double> enp;
  Eigen::VectorXd hat_diag;
  Eigen::MatrixXd se_factor;  // sum_c C_j[i,c]^2
  Eigen::MatrixXd beta;       // C_j y
};

// Nonzeros of the smoother at one bandwidth.
std::size_t support_size(const dataset::NeighborIndex& index, const LocalKernel& k, double bandwidth) {
  std::size_t total = 0;
  std::vector<std::uint32_t> ids;
  std::vector<double> w;
  for (std::size_t i = 0; i < index.size(); ++i) {
    local_support(index, i, bandwidth, k, ids, w);
    total += ids.size();
  }
  return total;
}

// Dense P with P(i, r) = w_ir x_r / sum_r w_ir x_r^2.
void smoother_matrix(const dataset::NeighborIndex& index, const LocalKernel& k, double bandwidth, const Eigen::VectorXd& x,
                     RowMatrix& p) {
  const auto n = static_cast<Eigen::Index>(index.size());
  p.setZero(n, n);
#pragma omp parallel
  {
    std::vector<std::uint32_t> ids;
    std::vector<double> w;
#pragma omp for schedule(dynamic, 8)
    for (Eigen::Index i = 0; i < n; ++i) {
      local_support(index, static_cast<std::size_t>(i), bandwidth, k, ids, w);
      double den = 0.0;
      for (std::size_t r = 0; r < ids.size(); ++r) den += w[r] * x[ids[r]] * x[ids[r]];
      if (den <= 0.0) continue;
      for (std::size_t r = 0; r < ids.size(); ++r) p(i, ids[r]) = w[r] * x[ids[r]] / den;
    }
  }
}

ReplayOutput replay_hat(const Design& design, const dataset::NeighborIndex& index, const LocalKernel& k,
                        const std::vector<Step>& steps, std::size_t budget_bytes) {
  const auto n = static_cast<Eigen::Index>(design.n());
  const auto surfaces = design.X.cols();
  // Wide kernels switch the replay to an explicit smoother and a blocked product.
  const auto nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  bool dense_smoother = nn * sizeof(double) <= budget_bytes / 2;
  if (dense_smoother) {
    std::map<double, std::size_t> sizes;
    std::size_t nnz = 0;
    for (std::size_t st = 1; st < steps.size(); ++st) {
      auto [it, fresh] = sizes.try_emplace(steps[st].bandwidth, 0);
      if (fresh) it->second = support_size(index, k, steps[st].bandwidth);
      nnz += it->second;
    }
    dense_smoother = steps.size() > 1 && nnz * 8 > nn * (steps.size() - 1);
  }

  const std::size_t per_column = static_cast<std::size_t>(surfaces + 2) * static_cast<std::size_t>(n) * sizeof(double);
  const std::size_t column_budget = dense_smoother ? budget_bytes - nn * sizeof(double) : budget_bytes;
  const auto width = static_cast<Eigen::Index>(std::clamp<std::size_t>(column_budget / std::max<std::size_t>(per_column, 1), 1,
                                                                       static_cast<std::size_t>(n)));

  // GWR initialisation operators: A_i^{-1} and the support at the initial bandwidth.
  const double bw0 = steps.front().bandwidth;
  std::vector<Eigen::MatrixXd> a_inv(static_cast<std::size_t>(n));
  std::vector<double> b0(static_cast<std::size_t>(n));
#pragma omp parallel
  {
    std::vector<std::uint32_t> ids;
    std::vector<double> w;
#pragma omp for schedule(dynamic, 8)
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      local_support(index, u, bw0, k, ids, w);
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(surfaces, surfaces);
      for (std::size_t r = 0; r < ids.size(); ++r) a.noalias() += w[r] * design.X.row(ids[r]).transpose() * design.X.row(ids[r]);
      a_inv[u] = a.colPivHouseholderQr().inverse();
      b0[u] = location_bandwidth(index, u, bw0, k.mode);
    }
  }

  ReplayOutput out;
  out.enp.assign(static_cast<std::size_t>(surfaces), 0.0);
  out.hat_diag = Eigen::VectorXd::Zero(n);
  out.se_factor = Eigen::MatrixXd::Zero(n, surfaces);
  out.beta = Eigen::MatrixXd::Zero(n, surfaces);

  std::vector<RowMatrix> c(static_cast<std::size_t>(surfaces));
  RowMatrix s, m, next, p;
  for (Eigen::Index c0 = 0; c0 < n; c0 += width) {
    const Eigen::Index w = std::min(width, n - c0);
    for (auto& cj : c) cj.setZero(n, w);
#pragma omp parallel for schedule(dynamic, 8)
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index col = 0; col < w; ++col) {
        const Eigen::Index l = c0 + col;
        const double wl = kernel_weight(index.distance(static_cast<std::size_t>(i), static_cast<std::size_t>(l)),
                                        b0[static_cast<std::size_t>(i)], k.kernel);
        if (wl == 0.0) continue;
        const Eigen::VectorXd v = a_inv[static_cast<std::size_t>(i)] * design.X.row(l).transpose() * wl;
        for (Eigen::Index j = 0; j < surfaces; ++j) c[static_cast<std::size_t>(j)](i, col) = v[j];
      }
    }
    s.setZero(n, w);
    for (Eigen::Index j = 0; j < surfaces; ++j) s += design.X.col(j).asDiagonal() * c[static_cast<std::size_t>(j)];

    for (std::size_t st = 1; st < steps.size(); ++st) {
      const auto j = static_cast<Eigen::Index>(steps[st].surface);
      auto& cj = c[static_cast<std::size_t>(j)];
      const Eigen::VectorXd xj = design.X.col(j);
      m = -s;
      m += xj.asDiagonal() * cj;
      for (Eigen::Index col = 0; col < w; ++col) m(c0 + col, col) += 1.0;
      const double bw = steps[st].bandwidth;
      if (dense_smoother) {
        smoother_matrix(index, k, bw, xj, p);
        next.noalias() = p * m;
      } else {
        next.setZero(n, w);
#pragma omp parallel
        {
          std::vector<std::uint32_t> ids;
          std::vector<double> wts;
#pragma omp for schedule(dynamic, 8)
          for (Eigen::Index i = 0; i < n; ++i) {
            local_support(index, static_cast<std::size_t>(i), bw, k, ids, wts);
            double den = 0.0;
            for (std::size_t r = 0; r < ids.size(); ++r) den += wts[r] * xj[ids[r]] * xj[ids[r]];
            if (den <= 0.0) continue;
            for (std::size_t r = 0; r < ids.size(); ++r) {
              const double coef = wts[r] * xj[ids[r]] / den;
              if (coef != 0.0) next.row(i) += coef * m.row(ids[r]);
            }
          }
        }
      }
      s += xj.asDiagonal() * (next - cj);
      cj.swap(next);
    }

    const Eigen::VectorXd y_chunk = design.y.segment(c0, w);
    for (Eigen::Index j = 0; j < surfaces; ++j) {
      const auto& cj = c[static_cast<std::size_t>(j)];
      for (Eigen::Index col = 0; col < w; ++col) out.enp[static_cast<std::size_t>(j)] += design.X(c0 + col, j) * cj(c0 + col, col);
      out.se_factor.col(j) += cj.rowwise().squaredNorm();
      out.beta.col(j) += cj * y_chunk;
    }
    for (Eigen::Index col = 0; col < w; ++col) out.hat_diag[c0 + col] = s(c0 + col, col);
  }
  return out;
}

}  // namespace

SurfaceFit fit_surface(const Eigen::VectorXd& x, const Eigen::VectorXd& target, const dataset::NeighborIndex& index,
                       const LocalKernel& k, double bandwidth) {
  const auto n = static_cast<Eigen::Index>(x.size());
  SurfaceFit fit;
  fit.beta.resize(n);
  fit.fitted.resize(n);
  Eigen::VectorXd trace_terms(n);
  std::vector<std::optional<Error>> errors(static_cast<std::size_t>(n));
#pragma omp parallel
  {
    std::vector<std::uint32_t> ids;
    std::vector<double> w;
#pragma omp for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      local_support(index, u, bandwidth, k, ids, w);
      double num = 0.0, den = 0.0;
      for (std::size_t r = 0; r < ids.size(); ++r) {
        num += w[r] * x[ids[r]] * target[ids[r]];
        den += w[r] * x[ids[r]] * x[ids[r]];
      }
      if (!(den > 0.0)) {
        errors[u] = Error(ErrorCode::local_singularity, "covariate has no weighted variation at location " + std::to_string(u),
                          {{"location", u}, {"neighbors", ids.size()}});
        continue;
      }
      fit.beta[i] = num / den;
      fit.fitted[i] = x[i] * fit.beta[i];
      trace_terms[i] = x[i] * x[i] / den;
    }
  }
  for (auto& e : errors) {
    if (e) throw *e;
  }
  fit.trace = trace_terms.sum();
  fit.rss = (target - fit.fitted).squaredNorm();
  try {
    fit.aicc = aicc(fit.rss, static_cast<std::size_t>(n), fit.trace);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::oversaturated_model) throw;
    fit.aicc = std::numeric_limits<double>::infinity();
  }
  return fit;
}

CalibratedModel mgwr_fit(const Design& design, const dataset::NeighborIndex& index, const ModelSpec& spec,
                         const ProgressFn& progress, const MgwrOptions& options) {
  const LocalKernel k{spec.kernel, spec.bandwidth_mode};
  const auto n = design.n();
  const auto surfaces = design.surfaces();
  auto report = [&](const Progress& p) {
    if (progress && !progress(p)) throw Error(ErrorCode::cancelled, "calibration cancelled");
  };

  const auto init_bw = select_gwr_bandwidth(design, index, spec, progress);
  const auto init = gwr_fit(design, index, k, init_bw.bandwidth);
  report({"initialized", 0, init_bw.score, 0.0});

  Eigen::MatrixXd beta = init.coefficients;
  Eigen::MatrixXd f = design.X.array() * beta.array();
  Eigen::VectorXd e = design.y - f.rowwise().sum();
  std::vector<double> bws(surfaces, init_bw.bandwidth);
  std::vector<int> repeats(surfaces, 0);
  std::vector<Step> steps{{kAllSurfaces, init_bw.bandwidth}};
  const auto [lo, hi] = search_range(spec, index, surfaces);
  const bool integer = spec.bandwidth_mode == BandwidthMode::adaptive;

  std::vector<BackfitIteration> trace;
  bool converged = false;
  double last_aicc = init_bw.score;
  for (int it = 1; it <= spec.convergence.max_iterations; ++it) {
    const Eigen::MatrixXd f_old = f;
    for (std::size_t j = 0; j < surfaces; ++j) {
      const auto jc = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd x = design.X.col(jc);
      const Eigen::VectorXd z = e + f.col(jc);
      double bw = bws[j];
      if (repeats[j] < options.stable_bandwidth_repeats) {
        const auto search = golden_bandwidth(lo, hi, integer, [&](double b) { return fit_surface(x, z, index, k, b).aicc; });
        repeats[j] = search.bandwidth == bws[j] ? repeats[j] + 1 : 0;
        bw = search.bandwidth;
      }
      const auto fit = fit_surface(x, z, index, k, bw);
      last_aicc = fit.aicc;
      bws[j] = bw;
      beta.col(jc) = fit.beta;
      f.col(jc) = fit.fitted;
      e = z - fit.fitted;
      steps.push_back({j, bw});
    }
    const double num = (f - f_old).squaredNorm();
    const double den = f.rowwise().sum().squaredNorm();
    const double soc = den > 0.0 ? std::sqrt(num / den) : 0.0;
    trace.push_back({it, bws, soc, e.squaredNorm()});
    report({"backfitting", it, last_aicc, soc});
    if (soc < spec.convergence.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::convergence, "backfitting did not converge within " + std::to_string(spec.convergence.max_iterations) + " iterations",
                {{"trace", trace_json(trace)}});
  }

  report({"hat_matrix", static_cast<int>(trace.size()), last_aicc, trace.back().soc});
  const auto replay = replay_hat(design, index, k, steps, options.replay_budget_bytes);

  CalibratedModel m;
  m.family = Family::mgwr;
  m.kernel = spec.kernel;
  m.bandwidth_mode = spec.bandwidth_mode;
  m.surface_names = design.surface_names;
  m.region_ids = design.region_ids;
  m.rows = design.rows;
  m.coefficients = beta;
  m.y = design.y;
  m.fitted = f.rowwise().sum();
  m.residuals = design.y - m.fitted;
  m.hat_diag = replay.hat_diag;
  m.enp_per_surface = replay.enp;
  m.hat_trace = 0.0;
  for (double v : replay.enp) m.hat_trace += v;
  m.bandwidths = bws;
  m.sigma2 = m.residuals.squaredNorm() / (static_cast<double>(n) - m.hat_trace);
  m.local_se = (m.sigma2 * replay.se_factor.array()).sqrt().matrix();
  m.target = design.target;
  m.covariates = design.covariates;
  m.trace = std::move(trace);
  m.excluded_region_ids = design.excluded_region_ids;
  m.replay_deviation = (replay.beta - beta).cwiseAbs().maxCoeff();
  return m;
}

}  // namespace geolens::regression
