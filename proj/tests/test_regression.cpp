#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <algorithm>
#include <random>

#include "geolens/common/error.hpp"
#include "geolens/dataset/neighbors.hpp"
#include "geolens/regression/calibrate.hpp"
#include "geolens/regression/criteria.hpp"
#include "geolens/regression/golden.hpp"
#include "geolens/regression/gwr.hpp"
#include "geolens/regression/mgwr.hpp"
#include "geolens/regression/ols.hpp"
#include "geolens/regression/reference.hpp"
#include "support.hpp"

using namespace geolens;
using namespace geolens::regression;

namespace {

dataset::GeoFeatureTable random_table(int rows, int cols, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(rows * cols);
  auto x1 = testing::gaussian(n, seed);
  auto x2 = testing::gaussian(n, seed + 100);
  auto noise = testing::gaussian(n, seed + 200, 0.3);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i % static_cast<std::size_t>(cols)) / cols;
    y[i] = 1.0 + (1.0 + u) * x1[i] - 0.5 * x2[i] + noise[i];
  }
  return testing::grid(rows, cols, {{"y", y}, {"x1", x1}, {"x2", x2}});
}

ModelSpec spec_for(Family f, Kernel k = Kernel::bisquare, BandwidthMode m = BandwidthMode::adaptive) {
  ModelSpec s;
  s.dependent = "y";
  s.independents = {"x1", "x2"};
  s.family = f;
  s.kernel = k;
  s.bandwidth_mode = m;
  return s;
}

}  // namespace

TEST_SUITE("regression") {
  TEST_CASE("ols agrees with the normal equations") {
    const auto t = random_table(6, 6, 1);
    const auto d = standardize(t, spec_for(Family::ols));
    const auto fit = fit_ols(d.X, d.y);
    const Eigen::VectorXd beta = (d.X.transpose() * d.X).ldlt().solve(d.X.transpose() * d.y);
    CHECK((fit.coefficients - beta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fit.hat_diag.sum() == doctest::Approx(3.0));
    const Eigen::MatrixXd H = d.X * (d.X.transpose() * d.X).inverse() * d.X.transpose();
    CHECK((fit.hat_diag - H.diagonal()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("singular designs name the offending columns") {
    Eigen::MatrixXd X(10, 3);
    for (int i = 0; i < 10; ++i) X.row(i) << 1.0, i, 2.0 * i;
    try {
      fit_ols(X, Eigen::VectorXd::LinSpaced(10, 0, 1), {"intercept", "a", "b"});
      FAIL("expected singular design");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::singular_design);
    }
  }

  TEST_CASE("aicc follows the closed form") {
    const double rss = 12.5, k = 4.2;
    const std::size_t n = 50;
    const double nd = 50.0;
    const double ll = -0.5 * nd * (std::log(2.0 * std::numbers::pi * rss / nd) + 1.0);
    const double expected = -2.0 * ll + 2.0 * k + 2.0 * k * (k + 1.0) / (nd - k - 1.0);
    CHECK(aicc(rss, n, k) == doctest::Approx(expected).epsilon(1e-14));
    CHECK_THROWS_AS(aicc(rss, 5, 4.0), Error);
  }

  TEST_CASE("golden search finds integer minima and prefers smaller ties") {
    for (int target : {3, 17, 42, 99}) {
      const auto r = golden_bandwidth(3, 100, true, [&](double b) { return std::abs(b - target); });
      CHECK(r.bandwidth == target);
    }
    const auto flat = golden_bandwidth(3, 100, true, [](double b) { return b < 40 ? 1.0 : 0.0; });
    CHECK(flat.bandwidth == 40);
    const auto edge = golden_bandwidth(3, 100, true, [](double b) { return -b; });
    CHECK(edge.bandwidth == 100);
    CHECK(edge.boundary);
    const auto fixed = golden_bandwidth(0.0, 10.0, false, [](double b) { return (b - 2.5) * (b - 2.5); });
    CHECK(fixed.bandwidth == doctest::Approx(2.5).epsilon(2e-3));
  }

  TEST_CASE("parallel gwr matches the dense serial reference") {
    const auto t = random_table(7, 7, 2);
    const auto d = standardize(t, spec_for(Family::gwr));
    dataset::NeighborIndex idx(t.centroids);
    const auto D = reference::distance_matrix(t.centroids);
    struct Case {
      Kernel k;
      BandwidthMode m;
      double bw;
    };
    const double step = t.centroids[1].x - t.centroids[0].x;
    for (const auto& c : {Case{Kernel::bisquare, BandwidthMode::adaptive, 15},
                          Case{Kernel::gaussian, BandwidthMode::adaptive, 12},
                          Case{Kernel::boxcar, BandwidthMode::adaptive, 20},
                          Case{Kernel::bisquare, BandwidthMode::fixed, 3.5 * step},
                          Case{Kernel::gaussian, BandwidthMode::fixed, 2.0 * step}}) {
      CAPTURE(regression::to_string(c.k));
      CAPTURE(regression::to_string(c.m));
      const auto fast = gwr_fit(d, idx, {c.k, c.m}, c.bw);
      const auto ref = reference::gwr_dense(d.X, d.y, reference::weight_matrix(D, c.bw, c.k, c.m));
      CHECK((fast.coefficients - ref.coefficients).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((fast.hat_diag - ref.hat.diagonal()).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(fast.hat_trace == doctest::Approx(ref.trace).epsilon(1e-10));
      CHECK((fast.local_se - ref.local_se).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(fast.sigma2 == doctest::Approx(ref.sigma2).epsilon(1e-10));
    }
  }

  TEST_CASE("hat trace falls as the bandwidth widens") {
    const auto t = random_table(8, 8, 12);
    const auto d = standardize(t, spec_for(Family::gwr));
    dataset::NeighborIndex idx(t.centroids);
    double prev = std::numeric_limits<double>::infinity();
    for (double bw : {8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0}) {
      const auto s = gwr_score(d, idx, {Kernel::bisquare, BandwidthMode::adaptive}, bw);
      CHECK(s.trace < prev);
      prev = s.trace;
    }
  }

  TEST_CASE("boxcar gwr with bandwidth n reproduces ols") {
    const auto t = random_table(5, 10, 3);
    const auto d = standardize(t, spec_for(Family::gwr, Kernel::boxcar));
    dataset::NeighborIndex idx(t.centroids);
    const auto g = gwr_fit(d, idx, {Kernel::boxcar, BandwidthMode::adaptive}, 50);
    const auto o = fit_ols(d.X, d.y);
    for (Eigen::Index i = 0; i < g.coefficients.rows(); ++i) {
      CHECK((g.coefficients.row(i).transpose() - o.coefficients).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("bandwidth search returns the best scored probe") {
    const auto t = random_table(8, 8, 4);
    const auto spec = spec_for(Family::gwr);
    const auto d = standardize(t, spec);
    dataset::NeighborIndex idx(t.centroids);
    const auto r = select_gwr_bandwidth(d, idx, spec);
    for (const auto& [bw, score] : r.evaluations) CHECK(r.score <= score);
    const auto direct = gwr_score(d, idx, {Kernel::bisquare, BandwidthMode::adaptive}, r.bandwidth);
    CHECK(direct.aicc == doctest::Approx(r.score));
  }

  TEST_CASE("mgwr hat replay matches a dense backfitting replay") {
    const auto t = random_table(7, 7, 5);
    const auto spec = spec_for(Family::mgwr);
    const auto d = standardize(t, spec);
    dataset::NeighborIndex idx(t.centroids);
    const auto m = mgwr_fit(d, idx, spec);
    const auto n = static_cast<Eigen::Index>(d.n());
    const auto p = static_cast<Eigen::Index>(d.surfaces());
    const auto D = reference::distance_matrix(t.centroids);

    const double init_bw = select_gwr_bandwidth(d, idx, spec).bandwidth;
    const auto W0 = reference::weight_matrix(D, init_bw, spec.kernel, spec.bandwidth_mode);
    std::vector<Eigen::MatrixXd> C(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(n, n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::MatrixXd XtW = d.X.transpose() * W0.row(i).asDiagonal();
      const Eigen::MatrixXd A = (XtW * d.X).inverse() * XtW;
      for (Eigen::Index j = 0; j < p; ++j) C[static_cast<std::size_t>(j)].row(i) = A.row(j);
    }
    auto R = [&](Eigen::Index j) -> Eigen::MatrixXd { return d.X.col(j).asDiagonal() * C[static_cast<std::size_t>(j)]; };
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    for (const auto& it : m.trace) {
      for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index k = 0; k < p; ++k) S += R(k);
        const auto W = reference::weight_matrix(D, it.bandwidths[static_cast<std::size_t>(j)], spec.kernel, spec.bandwidth_mode);
        Eigen::MatrixXd B(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const Eigen::RowVectorXd wx = W.row(i).cwiseProduct(d.X.col(j).transpose());
          B.row(i) = wx / wx.dot(d.X.col(j).transpose());
        }
        C[static_cast<std::size_t>(j)] = B * (I - S + R(j));
      }
    }
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < p; ++j) {
      S += R(j);
      CHECK(m.enp_per_surface[static_cast<std::size_t>(j)] == doctest::Approx(R(j).trace()).epsilon(1e-9));
      const Eigen::VectorXd beta = C[static_cast<std::size_t>(j)] * d.y;
      CHECK((beta - m.coefficients.col(j)).cwiseAbs().maxCoeff() < 1e-8);
      const Eigen::VectorXd se = (m.sigma2 * C[static_cast<std::size_t>(j)].rowwise().squaredNorm().array()).sqrt();
      CHECK((se - m.local_se.col(j)).cwiseAbs().maxCoeff() < 1e-8);
    }
    CHECK((S.diagonal() - m.hat_diag).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(m.replay_deviation < 1e-8);
  }

  TEST_CASE("mgwr replay is independent of the memory budget") {
    const auto t = random_table(6, 6, 6);
    const auto spec = spec_for(Family::mgwr);
    const auto d = standardize(t, spec);
    dataset::NeighborIndex idx(t.centroids);
    MgwrOptions tiny;
    tiny.replay_budget_bytes = 4096;
    const auto a = mgwr_fit(d, idx, spec);
    const auto b = mgwr_fit(d, idx, spec, {}, tiny);
    CHECK((a.hat_diag - b.hat_diag).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.local_se - b.local_se).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("mgwr backfitting matches an independent sweep on the multiscale grid") {
    const auto t = testing::grid(20, 20, dataset::synthetic::multiscale_columns(1));
    const auto m = calibrate(t, spec_for(Family::mgwr));
    const std::vector<double> rss = {0.8004535444134848, 0.800597681365979, 0.8006706759550306,
                                     0.8006914504650222, 0.8006969328385003, 0.8006983653743407};
    REQUIRE(m.trace.size() == rss.size());
    for (std::size_t i = 0; i < rss.size(); ++i) {
      CHECK(m.trace[i].bandwidths == std::vector<double>{400, 400, 10});
      CHECK(m.trace[i].rss == doctest::Approx(rss[i]).epsilon(1e-10));
    }
  }

  TEST_CASE("mgwr residual sum of squares never rises across iterations" * doctest::may_fail()) {
    const auto t = testing::grid(20, 20, dataset::synthetic::multiscale_columns(1));
    ModelSpec spec = spec_for(Family::mgwr);
    const auto m = calibrate(t, spec);
    for (std::size_t i = 1; i < m.trace.size(); ++i) CHECK(m.trace[i].rss <= m.trace[i - 1].rss * (1.0 + 1e-9));
    CHECK(m.trace.back().soc < spec.convergence.tolerance);
  }

  TEST_CASE("mgwr reports progress and honours cancellation") {
    const auto t = random_table(6, 6, 7);
    std::vector<std::string> stages;
    const auto m = calibrate(t, spec_for(Family::mgwr), [&](const Progress& p) {
      stages.push_back(p.stage);
      return true;
    });
    CHECK(std::count(stages.begin(), stages.end(), "backfitting") == static_cast<long>(m.trace.size()));
    CHECK(stages.back() == "hat_matrix");
    try {
      calibrate(t, spec_for(Family::mgwr), [](const Progress& p) { return p.stage != "backfitting"; });
      FAIL("expected cancellation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::cancelled);
    }
  }

  TEST_CASE("non-convergence carries the iteration trace") {
    const auto t = random_table(6, 6, 8);
    auto spec = spec_for(Family::mgwr);
    spec.convergence = {1e-14, 1};
    try {
      calibrate(t, spec);
      FAIL("expected a convergence error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::convergence);
      CHECK(e.details()["trace"].size() == 1);
    }
  }

  TEST_CASE("spec validation rejects bad input") {
    const auto t = random_table(4, 4, 9);
    auto s = spec_for(Family::gwr);
    s.independents = {"x1", "x1"};
    CHECK_THROWS_AS(s.validate(&t), Error);
    s.independents = {"nope"};
    CHECK_THROWS_AS(s.validate(&t), Error);
    s = spec_for(Family::gwr);
    s.bandwidth = 1000;
    CHECK_THROWS_AS(s.validate(&t), Error);
    CHECK(spec_from_json(to_json(spec_for(Family::mgwr))) == spec_for(Family::mgwr));
  }

  TEST_CASE("model json round trips bit for bit") {
    const auto t = random_table(6, 6, 10);
    const auto m = calibrate(t, spec_for(Family::mgwr));
    const auto j = to_json(m);
    const auto back = model_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.coefficients == m.coefficients);
  }

  TEST_CASE("raw coefficients undo the standardization") {
    const auto t = random_table(6, 6, 11);
    const auto m = calibrate(t, spec_for(Family::ols));
    const auto& x1 = t.column("x1");
    const auto& x2 = t.column("x2");
    const auto& y = t.column("y");
    for (std::size_t i = 0; i < 3; ++i) {
      const double pred = m.raw_coefficient(i, 0) + m.raw_coefficient(i, 1) * x1[i] + m.raw_coefficient(i, 2) * x2[i];
      const double fitted = m.fitted(static_cast<Eigen::Index>(i)) * m.target.stddev + m.target.mean;
      CHECK(pred == doctest::Approx(fitted).epsilon(1e-10));
      (void)y;
    }
  }
}
