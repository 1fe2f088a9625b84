#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>

#include "geolens/common/error.hpp"
#include "geolens/dataset/synthetic.hpp"
#include "geolens/diagnostics/diagnostics.hpp"
#include "geolens/regression/calibrate.hpp"
#include "geolens/regression/ols.hpp"
#include "support.hpp"

using namespace geolens;
using namespace geolens::diagnostics;

namespace {

regression::ModelSpec spec_for(regression::Family f) {
  regression::ModelSpec s;
  s.dependent = "y";
  s.independents = {"x1", "x2"};
  s.family = f;
  return s;
}

dataset::GeoFeatureTable ols_table(std::uint64_t seed, bool outlier) {
  auto x1 = testing::gaussian(30, seed);
  auto x2 = testing::gaussian(30, seed + 1);
  auto e = testing::gaussian(30, seed + 2, 0.5);
  std::vector<double> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = 2.0 + x1[i] - x2[i] + e[i];
  if (outlier) y[17] += 12.0;
  return testing::grid(5, 6, {{"y", y}, {"x1", x1}, {"x2", x2}});
}

dataset::SpatialWeights rook(int side) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const auto i = static_cast<std::size_t>(r * side + c);
      if (c + 1 < side) edges.emplace_back(i, i + 1);
      if (r + 1 < side) edges.emplace_back(i, i + static_cast<std::size_t>(side));
    }
  }
  return testing::graph(static_cast<std::size_t>(side * side), edges);
}

double direct_moran(const std::vector<double>& v, const dataset::SpatialWeights& w) {
  const auto n = v.size();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double num = 0.0, den = 0.0, s0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    den += (v[i] - mean) * (v[i] - mean);
    for (std::size_t j = 0; j < n; ++j) {
      const bool adj = std::find(w.neighbors[i].begin(), w.neighbors[i].end(), j) != w.neighbors[i].end();
      if (!adj) continue;
      const double wij = 1.0 / static_cast<double>(w.neighbors[i].size());
      s0 += wij;
      num += wij * (v[i] - mean) * (v[j] - mean);
    }
  }
  return static_cast<double>(n) / s0 * num / den;
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("cooks distance matches leave-one-out refits") {
    const auto t = ols_table(3, true);
    const auto spec = spec_for(regression::Family::ols);
    const auto m = regression::calibrate(t, spec);
    const auto d = regression::standardize(t, spec);
    const auto cd = cooks_d(m);
    const double p = 3.0;
    const Eigen::VectorXd beta = (d.X.transpose() * d.X).ldlt().solve(d.X.transpose() * d.y);
    const double s2 = (d.y - d.X * beta).squaredNorm() / (30.0 - p);
    for (Eigen::Index i = 0; i < 30; ++i) {
      Eigen::MatrixXd Xi(29, 3);
      Eigen::VectorXd yi(29);
      for (Eigen::Index r = 0, k = 0; r < 30; ++r) {
        if (r == i) continue;
        Xi.row(k) = d.X.row(r);
        yi(k++) = d.y(r);
      }
      const Eigen::VectorXd bi = (Xi.transpose() * Xi).ldlt().solve(Xi.transpose() * yi);
      const Eigen::VectorXd delta = beta - bi;
      const double loo = delta.dot(d.X.transpose() * d.X * delta) / (p * s2);
      CHECK(cd.values[static_cast<std::size_t>(i)] == doctest::Approx(loo).epsilon(1e-6));
    }
    const auto top = std::max_element(cd.values.begin(), cd.values.end()) - cd.values.begin();
    CHECK(top == 17);
    CHECK(cd.outlier[17]);
    CHECK(cd.threshold == doctest::Approx(4.0 / 30.0));
  }

  TEST_CASE("cooks mask is monotone in the threshold") {
    const auto m = regression::calibrate(ols_table(4, true), spec_for(regression::Family::ols));
    std::vector<bool> prev(30, false);
    for (double th : {1.0, 0.5, 0.2, 0.1, 0.05, 0.01}) {
      const auto cd = cooks_d(m, th);
      for (std::size_t i = 0; i < 30; ++i) CHECK((!prev[i] || cd.outlier[i]));
      prev = cd.outlier;
    }
  }

  TEST_CASE("standardized residuals follow the hand formula") {
    const auto m = regression::calibrate(ols_table(5, false), spec_for(regression::Family::ols));
    const auto a = std_residuals(m, ResidualConvention::predicted_minus_observed);
    const auto b = std_residuals(m, ResidualConvention::observed_minus_predicted);
    const double sigma = std::sqrt(m.residuals.squaredNorm() / (30.0 - 3.0));
    for (std::size_t i = 0; i < 30; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double e = m.residuals(ii) / (sigma * std::sqrt(1.0 - m.hat_diag(ii)));
      CHECK(std::abs(b.values[i]) == doctest::Approx(std::abs(e)).epsilon(1e-10));
      CHECK(a.values[i] == doctest::Approx(-b.values[i]));
      if (a.labels[i] == ResidualLabel::over) CHECK(b.labels[i] == ResidualLabel::under);
      if (a.labels[i] == ResidualLabel::under) CHECK(b.labels[i] == ResidualLabel::over);
      CHECK((a.labels[i] == ResidualLabel::over) == (a.values[i] > 0));
    }
  }

  TEST_CASE("global diagnostics follow the closed forms") {
    const auto m = regression::calibrate(ols_table(6, false), spec_for(regression::Family::ols));
    const auto g = global_diagnostics(m);
    const double rss = m.residuals.squaredNorm();
    const double tss = (m.y.array() - m.y.mean()).matrix().squaredNorm();
    const double n = 30.0, k = 3.0;
    const double ll = -0.5 * n * (std::log(2.0 * std::numbers::pi * rss / n) + 1.0);
    CHECK(g.aicc == doctest::Approx(2 * k - 2 * ll + 2 * k * (k + 1) / (n - k - 1)).epsilon(1e-12));
    CHECK(g.r2 == doctest::Approx(1.0 - rss / tss));
    CHECK(g.adj_r2 <= g.r2);
  }

  TEST_CASE("morans i agrees with a direct double sum") {
    const auto w = rook(4);
    std::vector<double> checker(16), halves(16);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        checker[static_cast<std::size_t>(r * 4 + c)] = (r + c) % 2;
        halves[static_cast<std::size_t>(r * 4 + c)] = c < 2 ? 0.0 : 1.0;
      }
    }
    const auto a = morans_i(checker, w, 199, 11);
    const auto b = morans_i(halves, w, 199, 11);
    CHECK(a.statistic < 0.0);
    CHECK(b.statistic > 0.0);
    CHECK(std::abs(a.statistic - direct_moran(checker, w)) < 1e-12);
    CHECK(std::abs(b.statistic - direct_moran(halves, w)) < 1e-12);
    CHECK(a.expected == doctest::Approx(-1.0 / 15.0));
    const auto again = morans_i(halves, w, 199, 11);
    CHECK(std::memcmp(&again.p_value, &b.p_value, sizeof(double)) == 0);
    CHECK(b.p_value < 0.05);
    CHECK_THROWS_AS(morans_i(std::vector<double>(16, 2.0), w, 99, 1), Error);
  }

  TEST_CASE("morans i is invariant to relabelling") {
    const auto w = rook(5);
    auto v = testing::gaussian(25, 9);
    std::vector<std::size_t> perm(25);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(3);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> inv(25);
    for (std::size_t i = 0; i < 25; ++i) inv[perm[i]] = i;
    dataset::SpatialWeights pw;
    pw.neighbors.resize(25);
    std::vector<double> pv(25);
    for (std::size_t i = 0; i < 25; ++i) {
      pv[inv[i]] = v[i];
      for (auto j : w.neighbors[i]) pw.neighbors[inv[i]].push_back(inv[j]);
    }
    for (auto& row : pw.neighbors) std::sort(row.begin(), row.end());
    CHECK(morans_i(v, w, 0, 1).statistic == doctest::Approx(morans_i(pv, pw, 0, 1).statistic).epsilon(1e-12));
  }

  TEST_CASE("significance masks nest as xi grows") {
    const auto t = testing::grid(20, 20, dataset::synthetic::multiscale_columns(1));
    const auto m = regression::calibrate(t, spec_for(regression::Family::mgwr));
    const auto s1 = significance_mask(m, 0.01);
    const auto s5 = significance_mask(m, 0.05);
    const auto s10 = significance_mask(m, 0.10);
    for (std::size_t j = 0; j < m.surfaces(); ++j) {
      for (std::size_t i = 0; i < m.n(); ++i) {
        CHECK((!s1.mask[j][i] || s5.mask[j][i]));
        CHECK((!s5.mask[j][i] || s10.mask[j][i]));
      }
      const double alpha = std::min(1.0, 0.05 / m.enp_per_surface[j]);
      CHECK(s5.adjusted_alpha[j] == doctest::Approx(alpha));
      boost::math::students_t dist(static_cast<double>(m.n()) - m.hat_trace);
      CHECK(s5.t_critical[j] == doctest::Approx(boost::math::quantile(boost::math::complement(dist, alpha / 2.0))));
    }
    std::size_t x2 = 0;
    for (bool b : s5.mask[2]) x2 += b;
    CHECK(x2 == m.n());
  }

  TEST_CASE("boxcar full bandwidth local r2 equals global r2") {
    const auto t = ols_table(7, false);
    auto spec = spec_for(regression::Family::gwr);
    spec.kernel = regression::Kernel::boxcar;
    spec.bandwidth = 30;
    const auto m = regression::calibrate(t, spec);
    const auto lr = local_r2(m, t);
    const auto g = global_diagnostics(m);
    for (double v : lr.values) CHECK(v == doctest::Approx(g.r2).epsilon(1e-8));
  }

  TEST_CASE("diagnostics report round trips through json") {
    const auto t = testing::grid(8, 8, dataset::synthetic::multiscale_columns(2, 8, 8));
    const auto m = regression::calibrate(t, spec_for(regression::Family::gwr));
    const auto w = dataset::queen_adjacency(t);
    const auto r = diagnose(m, t, w, Options{0.05, 99, 5});
    const auto j = to_json(r);
    CHECK(to_json(report_from_json(j)) == j);
    const auto r2 = diagnose(m, t, w, Options{0.05, 99, 5});
    CHECK(to_json(r2) == j);
  }
}
