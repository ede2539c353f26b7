/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "lenkpf/errors.hpp"
#include "lenkpf/scoring.hpp"

using namespace lenkpf;

namespace {

// Integral of (F(x) - 1{x >= t})^2 for the empirical F, by the trapezoid rule
// on the breakpoints. The integrand is constant between breakpoints, so each
// panel uses its one-sided limits.
double crps_trapezoid(const Eigen::VectorXd& x, double t) {
  std::vector<double> nodes(x.data(), x.data() + x.size());
  nodes.push_back(t);
  std::sort(nodes.begin(), nodes.end());
  const double k = static_cast<double>(x.size());
  auto integrand = [&](double at) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) f += x(i) <= at ? 1.0 : 0.0;
    const double step = at >= t ? 1.0 : 0.0;
    return (f / k - step) * (f / k - step);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double a = nodes[i], b = nodes[i + 1];
    if (b == a) continue;
    const double left = integrand(std::nextafter(a, b));
    const double right = integrand(std::nextafter(b, a));
    total += 0.5 * (left + right) * (b - a);
  }
  return total;
}

Eigen::VectorXd normals(Eigen::Index k, RandomStream& rng, double sd = 1.0) {
  Eigen::VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v(i) = sd * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("CRPS examples") {
  CHECK(crps_empirical(Eigen::VectorXd::Constant(1, 2.5), 1.0) == 1.5);
  CHECK(crps_empirical(Eigen::VectorXd::Constant(7, 0.3), 0.3) == 0.0);
  CHECK(crps_empirical(Eigen::Vector2d(0.0, 1.0), 0.0) == 0.25);
  CHECK(crps_trapezoid(Eigen::Vector2d(0.0, 1.0), 0.0) == doctest::Approx(0.25));
  CHECK_THROWS_AS(crps_empirical(Eigen::VectorXd(0), 0.0), InvalidParameter);
  CHECK_THROWS_AS(crps_empirical(Eigen::Vector2d(0.0, std::nan("")), 0.0), InvalidParameter);
  CHECK_THROWS_AS(crps_empirical(Eigen::Vector2d(0.0, 1.0), INFINITY), InvalidParameter);
}

TEST_CASE("CRPS against the integral definition") {
  RandomStream rng(1);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index k = 1 + t % 20;
    Eigen::VectorXd x = normals(k, rng, 2.0);
    if (t % 5 == 0) x(0) = x(k - 1);  // ties
    const double truth = t % 7 == 0 ? x(0) : 2.0 * rng.normal();
    worst = std::max(worst, std::abs(crps_empirical(x, truth) - crps_trapezoid(x, truth)));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("CRPS properties") {
  RandomStream rng(2);
  for (int t = 0; t < 300; ++t) {
    const Eigen::Index k = 1 + t % 30;
    const Eigen::VectorXd x = normals(k, rng);
    const double truth = rng.normal();
    const double c = crps_empirical(x, truth);
    CHECK(c >= 0.0);
    CHECK(c <= (x.array() - truth).abs().mean() + 1e-15);
    Eigen::VectorXd reversed = x.reverse();
    CHECK(crps_empirical(reversed, truth) == doctest::Approx(c).epsilon(1e-12));
    const double shift = 10.0 * rng.normal();
    CHECK(crps_empirical((x.array() + shift).matrix(), truth + shift) ==
          doctest::Approx(c).epsilon(1e-9));
  }
}

TEST_CASE("CRPS prefers the calibrated ensemble") {
  RandomStream rng(3);
  double right = 0.0, wide = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const double truth = rng.normal();
    right += crps_empirical(normals(100, rng), truth);
    wide += crps_empirical(normals(100, rng, std::sqrt(2.0)), truth);
  }
  CHECK(right < wide);
}

TEST_CASE("field CRPS") {
  SUBCASE("constant fields") {
    const Eigen::MatrixXd ens = Eigen::MatrixXd::Constant(4, 6, 2.0);
    CHECK(field_crps(ens, Eigen::VectorXd::Constant(6, 1.0)) ==
          crps_empirical(Eigen::VectorXd::Constant(4, 2.0), 1.0));
  }
  SUBCASE("one perfect column") {
    Eigen::MatrixXd ens(2, 2);
    ens << 0.0, 0.0, 0.0, 1.0;
    CHECK(field_crps(ens, Eigen::Vector2d(0.0, 0.0)) == 0.125);
  }
  SUBCASE("random field") {
    RandomStream rng(4);
    const Eigen::MatrixXd ens = rng.normal_matrix(9, 5);
    const Eigen::VectorXd truth = normals(5, rng);
    double want = 0.0;
    for (Eigen::Index j = 0; j < 5; ++j) want += crps_trapezoid(ens.col(j), truth(j)) / 5.0;
    CHECK(field_crps(ens, truth) == doctest::Approx(want).epsilon(1e-10));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(field_crps(Eigen::MatrixXd::Zero(3, 4), Eigen::VectorXd::Zero(5)), ShapeError);
  }
}

TEST_CASE("rank histogram") {
  SUBCASE("truth below every member") {
    RankHistogram hist(5);
    RandomStream rng(1);
    for (int t = 0; t < 100; ++t) hist.add(normals(5, rng).array() + 10.0, 0.0, rng);
    CHECK(hist.counts()[0] == 100);
    CHECK(hist.total() == 100);
  }
  SUBCASE("ties with one member split evenly") {
    RankHistogram hist(1);
    RandomStream rng(2);
    for (int t = 0; t < 10000; ++t) hist.add(Eigen::VectorXd::Constant(1, 0.5), 0.5, rng);
    CHECK(std::abs(hist.counts()[0] - 5000) < 200);
    CHECK(hist.counts()[0] + hist.counts()[1] == 10000);
  }
  SUBCASE("calibrated forecasts pass a chi-square test") {
    const Eigen::Index k = 9;
    RankHistogram hist(k);
    RandomStream rng(3);
    for (int t = 0; t < 10000; ++t) hist.add(normals(k, rng), rng.normal(), rng);
    double chi2 = 0.0;
    const double expected = 10000.0 / static_cast<double>(k + 1);
    for (long c : hist.counts()) chi2 += (c - expected) * (c - expected) / expected;
    // 99th percentile of chi-square with 9 degrees of freedom.
    CHECK(chi2 < 21.666);
  }
  SUBCASE("spatial thinning and merging") {
    RankHistogram a(3), b(3);
    RandomStream rng(4);
    const Eigen::MatrixXd ens = rng.normal_matrix(3, 25);
    a.add_field(ens, Eigen::VectorXd::Zero(25), 10, rng);
    CHECK(a.total() == 3);
    b.add_field(ens, Eigen::VectorXd::Zero(25), 1, rng);
    a.merge(b);
    CHECK(a.total() == 28);
    CHECK_THROWS_AS(a.merge(RankHistogram(4)), ShapeError);
  }
  SUBCASE("time thinning") {
    CHECK(on_time_grid(1800.0, 1800.0));
    CHECK(on_time_grid(5400.0, 1800.0));
    CHECK_FALSE(on_time_grid(300.0, 1800.0));
    CHECK(on_time_grid(0.0, 1800.0));
  }
}

TEST_CASE("score records") {
  ScoreRecord r{3, 12, "block_lenkpf", "r", 0.5, 2.0};
  REQUIRE(r.relative_pct());
  CHECK(*r.relative_pct() == 25.0);
  std::ostringstream out;
  write_score_row(out, r);
  CHECK(out.str() == "3,12,block_lenkpf,r,0.5,2,25\n");

  r.crps_free = 0.0;
  CHECK_FALSE(r.relative_pct());
  std::ostringstream empty;
  write_score_row(empty, r);
  CHECK(empty.str() == "3,12,block_lenkpf,r,0.5,0,\n");

  r.crps = std::nan("");
  r.crps_free = 1.0;
  std::ostringstream failed;
  write_score_row(failed, r);
  CHECK(failed.str() == "3,12,block_lenkpf,r,nan,1,\n");

  CHECK(csv_quote("plain") == "plain");
  CHECK(csv_quote("a,b") == "\"a,b\"");
  CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-300) == "1e-300");
  CHECK(std::string(kScoreHeader) == "rep,cycle,method,field,crps,crps_free,relative_pct");
}
