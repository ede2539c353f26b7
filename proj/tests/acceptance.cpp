/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "lenkpf/block.hpp"
#include "lenkpf/experiment.hpp"
#include "lenkpf/local.hpp"
#include "lenkpf/scoring.hpp"
#include "lenkpf/sweq.hpp"

using namespace lenkpf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0,
                double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

Eigen::MatrixXd selection(const std::vector<Index>& cols, Index d) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Index>(cols.size()), d);
  for (std::size_t r = 0; r < cols.size(); ++r) h(static_cast<Index>(r), cols[r]) = 1.0;
  return h;
}

// Whole-state EnKPF with explicit H and identity resampling.
Eigen::MatrixXd full_enkpf_identity(const Eigen::MatrixXd& x, const GaussObs& obs,
                                    const Eigen::MatrixXd& p, double gamma,
                                    const AnalysisNoise& noise) {
  const Eigen::MatrixXd h = selection(obs.columns(), x.cols());
  const Eigen::MatrixXd r = obs.r_diag().asDiagonal();
  const Eigen::MatrixXd f = p * h.transpose() * (gamma * h * p * h.transpose() + r).inverse();
  const Eigen::MatrixXd q = gamma * f * r * f.transpose();
  const Eigen::MatrixXd k2 =
      q * h.transpose() * (h * q * h.transpose() + r / (1.0 - gamma)).inverse();
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    const Eigen::VectorXd nu = xi + gamma * f * (obs.y() - h * xi);
    const Eigen::VectorXd mu = nu + k2 * (obs.y() - h * nu);
    const Eigen::VectorXd e_q = std::sqrt(gamma) * f *
                                noise.eta.row(i).transpose().cwiseProduct(obs.r_diag().cwiseSqrt());
    const Eigen::VectorXd e_r = noise.resid.row(i).transpose().cwiseProduct(
        (obs.r_diag() / (1.0 - gamma)).cwiseSqrt());
    out.row(i) = (mu + e_q + k2 * (e_r - h * e_q)).transpose();
  }
  return out;
}

Eigen::MatrixXd dense_tapered(const Eigen::MatrixXd& members, const TaperSpec& taper,
                              const StateLayout& layout) {
  Eigen::MatrixXd p = ensemble_moments(members).cov;
  for (Index i = 0; i < p.rows(); ++i)
    for (Index j = 0; j < p.cols(); ++j)
      p(i, j) *= taper.weight(layout.point(i), layout.point(j));
  return p;
}

Eigen::MatrixXd gaussian_sample(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                Index k, RandomStream& rng) {
  const Eigen::MatrixXd l = cov.llt().matrixL();
  return (rng.normal_matrix(k, mean.size()) * l.transpose()).rowwise() + mean.transpose();
}

Eigen::VectorXd random_weights(Index k, RandomStream& rng) {
  // Mixture of flat, peaked and sparse weight vectors.
  const double spread = 0.1 + 6.0 * rng.uniform();
  Eigen::VectorXd log_w(k);
  for (Index i = 0; i < k; ++i) log_w(i) = spread * rng.normal();
  Eigen::VectorXd a = MixtureWeights::from_log(log_w).alpha();
  if (rng.uniform() < 0.2)
    for (Index i = 0; i < k; ++i)
      if (rng.uniform() < 0.5) a(i) = 0.0;
  if (a.sum() == 0.0) a(0) = 1.0;
  return a / a.sum();
}

// ---------------------------------------------------------------------------

Outcome reduction_identities() {
  RandomStream init(101);
  // Unit-scale instances: prior spread 1, R in [0.5, 1.5]. The weight gap at small
  // gamma is first order in gamma with slope ~ innovation^2 P / R^2, so instances
  // with R << P miss 1e-6 at gamma=1e-8 even though the limit is exact.
  long exact = 0, cases = 0;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Index k = 5 + t % 40, d = 1 + t % 6, m = 1 + t % 4;
    const Ensemble ens(init.normal_matrix(k, d));
    std::vector<Index> cols;
    for (Index j = 0; j < m; ++j) cols.push_back(static_cast<Index>(init.uniform() * static_cast<double>(d)));
    Eigen::VectorXd y(m), r(m);
    for (Index j = 0; j < m; ++j) {
      y(j) = init.normal();
      r(j) = 0.5 + init.uniform();
    }
    const GaussObs obs(y, cols, r);
    const Eigen::MatrixXd p = ensemble_moments(ens).cov;

    RandomStream r1(1000 + static_cast<std::uint64_t>(t)), r2(1000 + static_cast<std::uint64_t>(t));
    const EnkpfResult a = enkpf_update(ens, obs, p, 1.0, r1);
    const Ensemble b = enkf_update(ens, obs, p, r2);
    exact += a.analysis.members() == b.members();

    const Eigen::VectorXd wg = enkpf_weights(enkpf_stage1(ens, obs, p, 1e-8), obs).alpha();
    worst = std::max(worst, (wg - pf_weights(ens, obs).alpha()).cwiseAbs().maxCoeff());
    ++cases;
  }
  return {exact == cases && worst <= 1e-6,
          fmt("gamma=1 exact in %.0f/%.0f cases, max |w_enkpf - w_pf| = %.2e (slope %.1f)", exact,
              cases, worst, worst / 1e-8)};
}

// Replicated analyses of a linear-Gaussian system against the Kalman posterior.
struct KalmanCase {
  std::string name;
  Eigen::VectorXd m0;
  Eigen::MatrixXd p0;
  GaussObs obs;
};

struct KalmanCheck {
  long checks = 0;
  long failures = 0;
  double worst_z = 0.0;
  std::string worst;
};

void compare_replicates(const std::vector<Eigen::VectorXd>& means,
                        const std::vector<Eigen::MatrixXd>& covs,
                        const Eigen::VectorXd& mean_exact, const Eigen::MatrixXd& cov_exact,
                        const std::string& label, KalmanCheck& out) {
  const double reps = static_cast<double>(means.size());
  auto check = [&](const std::vector<double>& values, double exact, const std::string& what) {
    double mean = 0.0;
    for (double v : values) mean += v / reps;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean) / (reps - 1.0);
    const double se = std::sqrt(var / reps);
    const double z = std::abs(mean - exact) / se;
    ++out.checks;
    if (!(z < 3.0)) ++out.failures;
    if (z > out.worst_z) {
      out.worst_z = z;
      out.worst = label + " " + what;
    }
  };
  const Index d = mean_exact.size();
  for (Index i = 0; i < d; ++i) {
    std::vector<double> v;
    for (const auto& m : means) v.push_back(m(i));
    check(v, mean_exact(i), "mean[" + std::to_string(i) + "]");
  }
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) {
      std::vector<double> v;
      for (const auto& c : covs) v.push_back(c(i, j));
      check(v, cov_exact(i, j), "cov[" + std::to_string(i) + "," + std::to_string(j) + "]");
    }
}

void kalman_posterior(const KalmanCase& c, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  const Eigen::MatrixXd h = selection(c.obs.columns(), c.m0.size());
  const Eigen::MatrixXd s = h * c.p0 * h.transpose() + Eigen::MatrixXd(c.obs.r_diag().asDiagonal());
  const Eigen::MatrixXd gain = c.p0 * h.transpose() * s.inverse();
  mean = c.m0 + gain * (c.obs.y() - h * c.m0);
  cov = c.p0 - gain * h * c.p0;
}

Outcome kalman_convergence() {
  const Index k = 100000;
  const int reps = 40;
  KalmanCheck check;

  std::vector<KalmanCase> cases;
  cases.push_back({"scalar", Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1),
                   GaussObs(Eigen::VectorXd::Constant(1, 0.8), {0}, Eigen::VectorXd::Ones(1))});
  {
    Eigen::Vector3d m0(0.5, -1.0, 2.0);
    Eigen::Matrix3d p0;
    p0 << 1.0, 0.5, 0.2, 0.5, 2.0, 0.3, 0.2, 0.3, 1.5;
    cases.push_back({"d=3", m0, p0, GaussObs(Eigen::Vector2d(1.2, 1.0), {0, 2}, Eigen::Vector2d(0.5, 1.0))});
  }

  std::uint64_t seed = 0;
  for (const KalmanCase& c : cases) {
    Eigen::VectorXd mean_exact;
    Eigen::MatrixXd cov_exact;
    kalman_posterior(c, mean_exact, cov_exact);
    for (double gamma : {0.25, 0.5, 0.75}) {
      std::vector<Eigen::VectorXd> means;
      std::vector<Eigen::MatrixXd> covs;
      for (int r = 0; r < reps; ++r) {
        RandomStream rng(7000 + seed++);
        const Ensemble prior(gaussian_sample(c.m0, c.p0, k, rng));
        const EnkpfResult res = enkpf_update(prior, c.obs, ensemble_moments(prior).cov, gamma, rng);
        const auto mo = ensemble_moments(res.analysis);
        means.push_back(mo.mean);
        covs.push_back(mo.cov);
      }
      compare_replicates(means, covs, mean_exact, cov_exact,
                         "EnKPF " + c.name + " gamma=" + fmt("%.2f", gamma), check);
    }
  }

  // Block case: columns 0 and 1 share a grid point, column 2 is far away and
  // uncorrelated. Only column 0 is observed, so u = {0}, v = {1}, w = {2}.
  {
    const GridGeometry geo(10, 1.0);
    const StateLayout layout(geo, {0, 0, 5});
    const TaperSpec taper(1.0, geo);
    Eigen::Vector3d m0(0.2, -0.5, 1.0);
    Eigen::Matrix3d p0;
    p0 << 1.0, 0.6, 0.0, 0.6, 1.5, 0.0, 0.0, 0.0, 0.8;
    const KalmanCase c{"block", m0, p0,
                       GaussObs(Eigen::VectorXd::Constant(1, 0.9), {0}, Eigen::VectorXd::Constant(1, 0.5))};
    const ObservationBlock block = compute_uvw(c.obs, taper, layout);
    Eigen::VectorXd mean_exact;
    Eigen::MatrixXd cov_exact;
    kalman_posterior(c, mean_exact, cov_exact);
    for (double gamma : {0.25, 0.5, 0.75}) {
      std::vector<Eigen::VectorXd> means;
      std::vector<Eigen::MatrixXd> covs;
      for (int r = 0; r < reps; ++r) {
        RandomStream rng(7000 + seed++);
        Eigen::MatrixXd x = gaussian_sample(c.m0, c.p0, k, rng);
        BlockOptions opt;
        opt.fixed_gamma = gamma;
        assimilate_block(x, block, taper, layout, opt, AnalysisNoise::draw(k, 1, rng));
        const auto mo = ensemble_moments(x);
        means.push_back(mo.mean);
        covs.push_back(mo.cov);
      }
      compare_replicates(means, covs, mean_exact, cov_exact,
                         "BLOCK gamma=" + fmt("%.2f", gamma), check);
    }
  }
  return {check.failures == 0,
          fmt("%.0f of %.0f moments outside 3 SE (40 replicates of k=1e5); largest z = %.2f",
              static_cast<double>(check.failures), static_cast<double>(check.checks), check.worst_z) +
              " at " + check.worst};
}

Outcome balanced_sampling() {
  RandomStream rng(202);
  long violations = 0, vectors = 0;
  for (int t = 0; t < 10000; ++t) {
    const Index k = 2 + static_cast<Index>(rng.uniform() * 199.0);
    const MixtureWeights w(random_weights(k, rng));
    const auto n = balanced_resample(w, rng).counts();
    for (Index j = 0; j < k; ++j)
      if (!(std::abs(static_cast<double>(n[static_cast<std::size_t>(j)]) -
                     static_cast<double>(k) * w[j]) < 1.0))
        ++violations;
    ++vectors;
  }
  return {violations == 0, fmt("%.0f violations over %.0f weight vectors",
                               static_cast<double>(violations), static_cast<double>(vectors))};
}

Outcome block_equivalence() {
  RandomStream rng(303);
  double worst = 0.0;
  long cases = 0, w_changed = 0;
  for (int t = 0; t < 300; ++t) {
    const Index d = 4 + t % 9;  // 4..12
    const GridGeometry geo(30, 1.0);
    std::vector<Index> points;
    for (Index c = 0; c < d; ++c) points.push_back(static_cast<Index>(rng.uniform() * 30.0));
    const StateLayout layout(geo, points);
    const TaperSpec taper(1.0 + 2.0 * rng.uniform(), geo);
    const Index m = 1 + t % 3;
    std::vector<Index> cols;
    while (static_cast<Index>(cols.size()) < m) {
      const Index c = static_cast<Index>(rng.uniform() * static_cast<double>(d));
      if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    }
    const Index k = 10 + t % 20;
    const Eigen::MatrixXd members = rng.normal_matrix(k, d) * (0.5 + rng.uniform());
    Eigen::VectorXd y(m), r(m);
    for (Index j = 0; j < m; ++j) {
      y(j) = 2.0 * rng.normal();
      r(j) = 0.05 + rng.uniform();
    }
    const GaussObs obs(y, cols, r);
    const ObservationBlock block = compute_uvw(obs, taper, layout);
    const AnalysisNoise noise = AnalysisNoise::draw(k, m, rng);

    Eigen::MatrixXd x = members;
    BlockOptions opt;
    opt.identity_resampling = true;
    const BlockDiagnostics diag = assimilate_block(x, block, taper, layout, opt, noise);
    if (diag.gamma >= 1.0) continue;  // the whole-state oracle needs gamma < 1
    const Eigen::MatrixXd want =
        full_enkpf_identity(members, obs, dense_tapered(members, taper, layout), diag.gamma, noise);
    worst = std::max(worst, (x - want).cwiseAbs().maxCoeff());
    w_changed += !(x(Eigen::all, block.w) == members(Eigen::all, block.w));
    ++cases;
  }
  return {worst <= 1e-10 && w_changed == 0 && cases >= 200,
          fmt("max |block - full| = %.2e over %.0f systems (d<=12)", worst, static_cast<double>(cases))};
}

Outcome locality() {
  const GridGeometry geo(100, 500.0);
  const StateLayout layout = StateLayout::stacked(geo, 3);
  const TaperSpec taper(2500.0, geo);
  const LocalWindowSpec window(2500.0, geo);
  const EssBand band;
  RandomStream rng(404);
  long changed[3] = {0, 0, 0}, checked = 0;
  for (int t = 0; t < 100; ++t) {
    const Index k = 10 + t % 11;
    // Smooth ensemble along the grid, per field.
    const Eigen::MatrixXd z = rng.normal_matrix(k, layout.dimension());
    Eigen::MatrixXd x = z;
    for (Index c = 0; c < layout.dimension(); ++c) {
      const Index f = c / 100, p = c % 100;
      x.col(c) += 0.6 * z.col(f * 100 + (p + 1) % 100) + 0.6 * z.col(f * 100 + (p + 99) % 100);
    }
    const Ensemble ens(x);
    std::vector<Index> cols, obs_points;
    for (Index p = 0; p < 100; ++p)
      if (rng.uniform() < 0.05) {
        cols.push_back(layout.column(2, p));
        obs_points.push_back(p);
        if (rng.uniform() < 0.5) {
          cols.push_back(layout.column(1, p));
          obs_points.push_back(p);
        }
      }
    if (cols.empty()) {
      cols.push_back(layout.column(2, 50));
      obs_points.push_back(50);
    }
    const Index m = static_cast<Index>(cols.size());
    Eigen::VectorXd y(m);
    for (Index j = 0; j < m; ++j) y(j) = x.col(cols[static_cast<std::size_t>(j)]).mean() + rng.normal();
    const GaussObs obs(y, cols, Eigen::VectorXd::Constant(m, 0.1));

    RandomStream r1 = rng.split(1), r2 = rng.split(2);
    const Eigen::MatrixXd a_lenkf = lenkf_update(ens, obs, window, taper, layout, r1).members();
    const Eigen::MatrixXd a_naive =
        naive_lenkpf_update(ens, obs, window, taper, layout, band, r2).analysis.members();
    const Eigen::MatrixXd a_block =
        block_lenkpf_update(ens, obs, taper, layout, 5000.0, band, rng.split(3)).analysis.members();
    rng = rng.split(4);

    std::set<Index> reach;
    for (const auto& b : partition_blocks(obs, taper, layout, 5000.0))
      for (Index c : b.touched()) reach.insert(c);
    for (Index c = 0; c < layout.dimension(); ++c) {
      bool near = false;
      for (Index p : obs_points) near = near || window.contains(layout.point(c), p);
      if (!near) {
        changed[0] += !(a_lenkf.col(c) == x.col(c));
        changed[1] += !(a_naive.col(c) == x.col(c));
        ++checked;
      }
      if (!reach.count(c)) changed[2] += !(a_block.col(c) == x.col(c));
    }
  }
  const bool pass = changed[0] == 0 && changed[1] == 0 && changed[2] == 0 && checked > 0;
  return {pass, fmt("columns changed outside the influence region: LEnKF %.0f, NAIVE %.0f, BLOCK %.0f (100 cases)",
                    static_cast<double>(changed[0]), static_cast<double>(changed[1]),
                    static_cast<double>(changed[2]))};
}

Outcome adaptive_gamma_band() {
  RandomStream rng(505);
  const EssBand band;
  long lo_ok = 0, hi_ok = 0, cases = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index k = 10 + static_cast<Index>(rng.uniform() * 91.0);
    const Index d = 1 + t % 5, m = 1 + (t / 5) % 5;
    const Ensemble ens(rng.normal_matrix(k, d) * std::exp(1.5 * rng.normal()));
    std::vector<Index> cols;
    for (Index j = 0; j < m; ++j) cols.push_back(static_cast<Index>(rng.uniform() * static_cast<double>(d)));
    Eigen::VectorXd y(m), r(m);
    const double r_scale = std::exp(2.0 * rng.normal());
    for (Index j = 0; j < m; ++j) {
      y(j) = ens.members()(0, cols[static_cast<std::size_t>(j)]) + std::sqrt(r_scale) * rng.normal() +
             rng.normal();
      r(j) = r_scale * (0.5 + rng.uniform());
    }
    const GaussObs obs(y, cols, r);
    const GammaChoice c = choose_gamma(global_problem(ens, obs, ensemble_moments(ens).cov), band);
    const double frac = c.ess / static_cast<double>(k);
    lo_ok += frac >= 0.5;
    hi_ok += frac <= 0.8 || c.gamma == 0.0;
    ++cases;
  }
  const double hi_share = static_cast<double>(hi_ok) / static_cast<double>(cases);
  return {lo_ok == cases && hi_share >= 0.95,
          fmt("ESS >= 0.5k in %.0f/%.0f, ESS <= 0.8k or gamma = 0 in %.1f%%",
              static_cast<double>(lo_ok), static_cast<double>(cases), 100.0 * hi_share)};
}

Outcome perturbation_covariance() {
  const Index k = 100000;
  RandomStream rng(606);
  long checks = 0, failures = 0;
  double worst_z = 0.0;
  for (int t = 0; t < 4; ++t) {
    const Index d = 2 + t % 4;  // 2..5
    const Index m = 1 + t % 3;
    const Eigen::MatrixXd a = rng.normal_matrix(d, d);
    const Eigen::MatrixXd p = a * a.transpose() / static_cast<double>(d) +
                              0.3 * Eigen::MatrixXd::Identity(d, d);
    std::vector<Index> cols;
    for (Index j = 0; j < m; ++j) cols.push_back(j % d);
    Eigen::VectorXd r(m);
    for (Index j = 0; j < m; ++j) r(j) = 0.2 + rng.uniform();
    const Eigen::MatrixXd h = selection(cols, d);
    const double gamma = 0.2 + 0.2 * t;

    LocalProblem problem;
    problem.state = Eigen::MatrixXd::Zero(k, d);
    problem.observed = Eigen::MatrixXd::Zero(k, m);
    problem.cov.cross = p * h.transpose();
    problem.cov.obs = h * p * h.transpose();
    problem.y = Eigen::VectorXd::Zero(m);
    problem.r = r;
    const EnkpfProposal prop = enkpf_proposal(problem, gamma, AnalysisNoise::draw(k, m, rng));

    const Eigen::MatrixXd rm = r.asDiagonal();
    const Eigen::MatrixXd s = gamma * h * p * h.transpose() + rm;
    const Eigen::MatrixXd q = gamma * p * h.transpose() * s.inverse() * rm * s.inverse() * h * p;
    const Eigen::MatrixXd k2 = q * h.transpose() * (h * q * h.transpose() + rm / (1.0 - gamma)).inverse();
    const Eigen::MatrixXd target = (Eigen::MatrixXd::Identity(d, d) - k2 * h) * q;

    const Eigen::MatrixXd& e = prop.perturbations;
    const Eigen::MatrixXd emp = e.transpose() * e / static_cast<double>(k);  // zero-mean draws
    for (Index i = 0; i < d; ++i)
      for (Index j = i; j < d; ++j) {
        const double se = std::sqrt((target(i, i) * target(j, j) + target(i, j) * target(i, j)) /
                                    static_cast<double>(k));
        const double z = std::abs(emp(i, j) - target(i, j)) / se;
        worst_z = std::max(worst_z, z);
        ++checks;
        failures += !(z < 3.0);
      }
  }
  return {failures == 0, fmt("%.0f of %.0f entries outside 3 SE; largest z = %.2f",
                             static_cast<double>(failures), static_cast<double>(checks), worst_z)};
}

double crps_trapezoid(const Eigen::VectorXd& x, double t) {
  std::vector<double> nodes(x.data(), x.data() + x.size());
  nodes.push_back(t);
  std::sort(nodes.begin(), nodes.end());
  const double k = static_cast<double>(x.size());
  auto integrand = [&](double at) {
    double f = 0.0;
    for (Index i = 0; i < x.size(); ++i) f += x(i) <= at ? 1.0 : 0.0;
    const double step = at >= t ? 1.0 : 0.0;
    return (f / k - step) * (f / k - step);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double a = nodes[i], b = nodes[i + 1];
    if (b == a) continue;
    total += 0.5 * (integrand(std::nextafter(a, b)) + integrand(std::nextafter(b, a))) * (b - a);
  }
  return total;
}

Outcome crps_oracle() {
  RandomStream rng(707);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Index k = 1 + t % 20;
    Eigen::VectorXd x(k);
    for (Index i = 0; i < k; ++i) x(i) = 3.0 * rng.normal();
    const double truth = 3.0 * rng.normal();
    worst = std::max(worst, std::abs(crps_empirical(x, truth) - crps_trapezoid(x, truth)));
  }
  const bool examples = crps_empirical(Eigen::VectorXd::Constant(1, 2.5), 1.0) == 1.5 &&
                        crps_empirical(Eigen::VectorXd::Constant(5, 0.7), 0.7) == 0.0 &&
                        crps_empirical(Eigen::Vector2d(0.0, 1.0), 0.0) == 0.25;
  return {worst <= 1e-8 && examples,
          fmt("max |empirical - trapezoid| = %.2e over 1000 instances; worked examples ", worst) +
              (examples ? "exact" : "WRONG")};
}

Outcome sweq_sanity() {
  ModelParams p;
  p.plume_rate = 0.0;
  p.diff_h = p.diff_u = p.diff_r = 0.0;
  RandomStream rng(808);

  ModelState s = ModelState::rest(p);
  for (Index i = 0; i < s.size(); ++i) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(s.size());
    s.h(i) = p.h0 + 0.005 * std::sin(x);
    s.u(i) = 0.002 * std::cos(2.0 * x);
  }
  const double m0 = s.h.sum();
  integrate(s, p, 100, rng);
  const double drift = std::abs(s.h.sum() - m0) / m0;

  ModelParams quiet;
  quiet.plume_rate = 0.0;
  ModelState rest = ModelState::rest(quiet);
  integrate(rest, quiet, 100, rng);
  const ModelState ref = ModelState::rest(quiet);
  const bool fixed = rest.h == ref.h && rest.u == ref.u && rest.r == ref.r;

  ModelParams decay = quiet;
  decay.diff_r = 0.0;
  ModelState wet = ModelState::rest(decay);
  wet.r.setConstant(0.5);
  integrate(wet, decay, 10, rng);
  const double want = 0.5 * std::exp(-decay.alpha_rain * 10.0 * decay.dt);
  const double decay_err = (wet.r.array() / want - 1.0).abs().maxCoeff();

  return {drift < 1e-10 && fixed && decay_err < 0.01,
          fmt("mass drift %.1e per 100 steps; rest state ", drift) +
              (fixed ? "fixed" : "MOVED") + fmt("; rain decay error %.1e", decay_err)};
}

// ---------------------------------------------------------------------------

struct DeskScale {
  bool ran = false;
  std::string error;
  double seconds_t1 = 0.0, seconds_t8 = 0.0;
  std::string scores_t1, scores_t8;
  ExperimentOutput result;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig desk_config(long reps, const std::filesystem::path& out, std::size_t threads) {
  ExperimentConfig cfg = parse_config("", std::string("hf"));
  cfg.methods = {"lenkf", "naive_lenkpf", "block_lenkpf", "free"};
  cfg.repetitions = reps;
  cfg.base_seed = 2016;
  cfg.threads = threads;
  cfg.output = out.string();
  cfg.validate();
  return cfg;
}

void run_desk_scale(DeskScale& desk, long reps, const std::filesystem::path& work) {
  if (desk.ran) return;
  desk.ran = true;
  try {
    for (std::size_t threads : {std::size_t{1}, std::size_t{8}}) {
      const auto dir = work / ("threads_" + std::to_string(threads));
      const ExperimentConfig cfg = desk_config(reps, dir, threads);
      const auto t0 = std::chrono::steady_clock::now();
      ExperimentOutput out = run_experiment(cfg);
      write_experiment(cfg, out);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (threads == 1) {
        desk.seconds_t1 = secs;
        desk.scores_t1 = slurp(dir / "scores.csv");
        desk.result = std::move(out);
      } else {
        desk.seconds_t8 = secs;
        desk.scores_t8 = slurp(dir / "scores.csv");
      }
    }
  } catch (const std::exception& e) {
    desk.error = e.what();
  }
}

Outcome desk_scale_skill(const DeskScale& desk, long reps) {
  if (!desk.error.empty()) return {false, "experiment failed: " + desk.error};
  const long last = 12;
  std::map<std::string, std::vector<double>> rel;  // method -> per-rep relative rain CRPS
  for (const auto& rep : desk.result.repetitions)
    for (const ScoreRecord& r : rep.scores)
      if (r.cycle == last && r.field == "r")
        rel[r.method].push_back(r.relative_pct().value_or(std::nan("")));
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
  };
  auto beats_lenkf = [&](const std::string& m) {
    long wins = 0;
    const auto& a = rel[m];
    const auto& b = rel["lenkf"];
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) wins += a[i] < b[i];
    return wins;
  };
  const double naive = mean(rel["naive_lenkpf"]), block = mean(rel["block_lenkpf"]),
               lenkf = mean(rel["lenkf"]);
  const long naive_wins = beats_lenkf("naive_lenkpf"), block_wins = beats_lenkf("block_lenkpf");
  const double need = 0.6 * static_cast<double>(reps);
  const bool pass = naive < 100.0 && block < 100.0 && static_cast<double>(naive_wins) >= need &&
                    static_cast<double>(block_wins) >= need && desk.seconds_t1 < 600.0;
  std::ostringstream d;
  d << fmt("cycle 12 mean relative rain CRPS: NAIVE %.1f%%, BLOCK %.1f%%, LEnKF %.1f%%; ", naive,
           block, lenkf)
    << "beat LEnKF in " << naive_wins << "/" << reps << " (NAIVE) and " << block_wins << "/"
    << reps << " (BLOCK) repetitions; " << fmt("%.0f s for %.0f repetitions", desk.seconds_t1,
                                               static_cast<double>(reps));
  return {pass, d.str()};
}

Outcome determinism(const DeskScale& desk) {
  if (!desk.error.empty()) return {false, "experiment failed: " + desk.error};
  const bool same = !desk.scores_t1.empty() && desk.scores_t1 == desk.scores_t8;
  return {same, std::string("scores.csv ") + (same ? "byte-identical" : "DIFFERS") +
                    fmt(" at 1 and 8 threads (%.0f bytes; %.0f s with 8 threads)",
                        static_cast<double>(desk.scores_t1.size()), desk.seconds_t8)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the LEnKPF library"};
  std::vector<int> only;
  long reps = 20;
  std::string work =
      (std::filesystem::temp_directory_path() / "lenkpf_acceptance").string();
  app.add_option("--only", only, "Run only these criteria (1-11)")->delimiter(',');
  app.add_option("--reps", reps, "Repetitions of the desk-scale experiment")->check(CLI::PositiveNumber);
  app.add_option("--work", work, "Directory for the desk-scale experiment output");
  CLI11_PARSE(app, argc, argv);

  DeskScale desk;
  struct Criterion {
    int id;
    std::string name;
    double limit_s;  // runtime bound; 0 when covered elsewhere
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "reduction identities", 1.0, reduction_identities},
      {2, "Kalman-oracle convergence", 30.0, kalman_convergence},
      {3, "balanced sampling", 5.0, balanced_sampling},
      {4, "block/whole-state equivalence", 1.0, block_equivalence},
      {5, "locality and w-invariance", 10.0, locality},
      {6, "adaptive gamma", 10.0, adaptive_gamma_band},
      {7, "perturbation covariance", 10.0, perturbation_covariance},
      {8, "CRPS oracle", 5.0, crps_oracle},
      {9, "SWEQ sanity", 5.0, sweq_sanity},
      {10, "desk-scale HF twin experiment", 0.0,
       [&] {
         run_desk_scale(desk, reps, work);
         return desk_scale_skill(desk, reps);
       }},
      {11, "determinism across thread counts", 0.0,
       [&] {
         run_desk_scale(desk, reps, work);
         return determinism(desk);
       }},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.limit_s > 0.0) {
      timing += fmt(", limit %.0f s", c.limit_s);
      if (secs >= c.limit_s) {
        o.pass = false;
        timing += " EXCEEDED";
      }
    }
    failed += !o.pass;
    std::printf("criterion %2d %s  %s: %s [%s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name.c_str(),
                o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
