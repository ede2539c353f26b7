/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/enkpf.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

namespace lenkpf {

AnalysisNoise AnalysisNoise::draw(Eigen::Index k, Eigen::Index m,
                                  RandomStream& rng) {
  AnalysisNoise noise;
  noise.eta = rng.normal_matrix(k, m);
  noise.resid = rng.normal_matrix(k, m);
  noise.offset = rng.uniform();
  return noise;
}

AnalysisNoise AnalysisNoise::select(std::span<const Eigen::Index> rows) const {
  const std::vector<Eigen::Index> cols(rows.begin(), rows.end());
  return AnalysisNoise{eta(Eigen::all, cols), resid(Eigen::all, cols), offset};
}

void LocalProblem::check() const {
  const auto k = state.rows();
  const auto m = y.size();
  if (k < 2) throw InsufficientEnsemble("analysis needs at least 2 members");
  if (observed.rows() != k || observed.cols() != m || r.size() != m ||
      cov.cross.rows() != state.cols() || cov.cross.cols() != m ||
      cov.obs.rows() != m || cov.obs.cols() != m)
    throw ShapeError("inconsistent local analysis problem");
}

namespace {

// Rows of y' - H X.
Eigen::MatrixXd innovations(const Eigen::MatrixXd& observed,
                            const Eigen::VectorXd& y) {
  return (-observed).rowwise() + y.transpose();
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw InvalidParameter("gamma must lie in [0, 1], got " +
                           std::to_string(gamma));
}

// Sigma = H Q H' + R / (1 - gamma) for gamma < 1.
Eigen::MatrixXd second_stage_cov(const Eigen::MatrixXd& q_obs,
                                 const Eigen::VectorXd& r, double gamma) {
  Eigen::MatrixXd sigma = q_obs;
  sigma.diagonal() += r / (1.0 - gamma);
  return sigma;
}

Eigen::VectorXd gaussian_log_density(const Eigen::MatrixXd& innov,
                                     const Eigen::MatrixXd& sigma) {
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw DegenerateWeights("observation-space covariance is not positive definite");
  // Whitened innovations; the normalizing constant is common to all members.
  const Eigen::MatrixXd white =
      llt.matrixL().solve(innov.transpose());
  return -0.5 * white.colwise().squaredNorm().transpose();
}

}  // namespace

Eigen::MatrixXd perturbed_obs_update(const LocalProblem& problem,
                                     const Eigen::MatrixXd& eta) {
  problem.check();
  if (eta.rows() != problem.members() || eta.cols() != problem.observations())
    throw ShapeError("perturbation matrix has the wrong shape");
  if (problem.observations() == 0) return problem.state;
  const Eigen::MatrixXd gain = kalman_gain(problem.cov, problem.r);
  const Eigen::MatrixXd perturbed =
      innovations(problem.observed, problem.y) +
      eta * problem.r.cwiseSqrt().asDiagonal();
  return problem.state + perturbed * gain.transpose();
}

EnkpfIntermediate::EnkpfIntermediate(const LocalProblem& problem, double gamma)
    : gamma_(gamma), r_(problem.r) {
  check_gamma(gamma);
  problem.check();
  Eigen::MatrixXd s = gamma * problem.cov.obs;
  s.diagonal() += problem.r;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  factor_ = ldlt.solve(problem.cov.cross.transpose()).transpose();
  factor_observed_ = ldlt.solve(problem.cov.obs.transpose()).transpose();
  const Eigen::MatrixXd innov = innovations(problem.observed, problem.y);
  if (gamma == 0.0) {
    nu_ = problem.state;
    nu_observed_ = problem.observed;
  } else {
    nu_ = problem.state + gamma * innov * factor_.transpose();
    nu_observed_ = problem.observed + gamma * innov * factor_observed_.transpose();
  }
}

Eigen::MatrixXd EnkpfIntermediate::q_cross() const {
  return gamma_ * factor_ * r_.asDiagonal() * factor_observed_.transpose();
}

Eigen::MatrixXd EnkpfIntermediate::q_observed() const {
  return gamma_ * factor_observed_ * r_.asDiagonal() *
         factor_observed_.transpose();
}

Eigen::MatrixXd EnkpfIntermediate::q_matrix() const {
  return gamma_ * factor_ * r_.asDiagonal() * factor_.transpose();
}

Eigen::MatrixXd EnkpfIntermediate::draw_q(const Eigen::MatrixXd& eta) const {
  return std::sqrt(gamma_) * (eta * r_.cwiseSqrt().asDiagonal()) *
         factor_.transpose();
}

Eigen::MatrixXd EnkpfIntermediate::draw_q_observed(
    const Eigen::MatrixXd& eta) const {
  return std::sqrt(gamma_) * (eta * r_.cwiseSqrt().asDiagonal()) *
         factor_observed_.transpose();
}

MixtureWeights enkpf_weights(const EnkpfIntermediate& inter,
                             const Eigen::VectorXd& y) {
  const auto k = inter.nu().rows();
  if (inter.gamma() == 1.0 || y.size() == 0) return MixtureWeights::uniform(k);
  const Eigen::MatrixXd sigma =
      second_stage_cov(inter.q_observed(), inter.r(), inter.gamma());
  return MixtureWeights::from_log(
      gaussian_log_density(innovations(inter.nu_observed(), y), sigma));
}

MixtureWeights enkpf_weights_observed(const Eigen::MatrixXd& observed,
                                      const Eigen::MatrixXd& obs_cov,
                                      const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& r, double gamma) {
  check_gamma(gamma);
  const auto k = observed.rows();
  if (gamma == 1.0 || y.size() == 0) return MixtureWeights::uniform(k);
  const Eigen::MatrixXd innov = innovations(observed, y);
  if (gamma == 0.0) {
    return MixtureWeights::from_log(
        -0.5 * (innov.array().square().matrix() * r.cwiseInverse()));
  }
  Eigen::MatrixXd s = gamma * obs_cov;
  s.diagonal() += r;
  const Eigen::MatrixXd factor =
      Eigen::LDLT<Eigen::MatrixXd>(s).solve(obs_cov.transpose()).transpose();
  const Eigen::MatrixXd nu_innov = innov - gamma * innov * factor.transpose();
  const Eigen::MatrixXd q_obs =
      gamma * factor * r.asDiagonal() * factor.transpose();
  return MixtureWeights::from_log(
      gaussian_log_density(nu_innov, second_stage_cov(q_obs, r, gamma)));
}

Eigen::MatrixXd EnkpfProposal::assemble(const ResampleIndices& indices) const {
  if (indices.size() != centers.rows())
    throw ShapeError("index vector does not match the ensemble size");
  Eigen::MatrixXd out(centers.rows(), centers.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) = centers.row(indices.idx[static_cast<std::size_t>(i)]) +
                 perturbations.row(i);
  return out;
}

EnkpfProposal enkpf_proposal(const LocalProblem& problem, double gamma,
                             const AnalysisNoise& noise) {
  check_gamma(gamma);
  problem.check();
  const auto k = problem.members();
  const auto m = problem.observations();
  if (noise.eta.rows() != k || noise.eta.cols() != m ||
      noise.resid.rows() != k || noise.resid.cols() != m)
    throw ShapeError("analysis noise has the wrong shape");

  EnkpfProposal out;
  out.gamma = gamma;
  if (gamma == 1.0 || m == 0) {
    out.weights = MixtureWeights::uniform(k);
    out.centers = m == 0 ? problem.state : perturbed_obs_update(problem, noise.eta);
    out.perturbations = Eigen::MatrixXd::Zero(k, problem.state.cols());
    return out;
  }

  const EnkpfIntermediate inter(problem, gamma);
  const Eigen::MatrixXd q_obs = inter.q_observed();
  const Eigen::MatrixXd sigma = second_stage_cov(q_obs, problem.r, gamma);
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw DegenerateWeights("observation-space covariance is not positive definite");
  // K2 = Q H' Sigma^-1, equal to K((1 - gamma) Q) with the original R.
  const Eigen::MatrixXd gain2 = llt.solve(inter.q_cross().transpose()).transpose();

  const Eigen::MatrixXd nu_innov = innovations(inter.nu_observed(), problem.y);
  out.weights = MixtureWeights::from_log(
      -0.5 * llt.matrixL().solve(nu_innov.transpose()).colwise().squaredNorm().transpose());
  out.centers = inter.nu() + nu_innov * gain2.transpose();

  const Eigen::MatrixXd e_r =
      noise.resid * (problem.r / (1.0 - gamma)).cwiseSqrt().asDiagonal();
  out.perturbations = inter.draw_q(noise.eta) +
                      (e_r - inter.draw_q_observed(noise.eta)) * gain2.transpose();
  return out;
}

EnkpfResult enkpf_analysis(const LocalProblem& problem, double gamma,
                           const AnalysisNoise& noise) {
  EnkpfProposal proposal = enkpf_proposal(problem, gamma, noise);
  ResampleIndices indices = gamma == 1.0
                                ? ResampleIndices::identity(problem.members())
                                : balanced_resample(proposal.weights, noise.offset);
  return EnkpfResult{Ensemble(proposal.assemble(indices), EnsembleKind::kAnalysis),
                     std::move(proposal.weights), std::move(indices), gamma};
}

void EssBand::check() const {
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
    throw InvalidParameter("ESS band must satisfy 0 < lo <= hi <= 1");
}

GammaChoice choose_gamma(const LocalProblem& problem, const EssBand& band) {
  band.check();
  problem.check();
  const double k = static_cast<double>(problem.members());
  auto ess_at = [&](double gamma) {
    return ess(enkpf_weights_observed(problem.observed, problem.cov.obs,
                                      problem.y, problem.r, gamma));
  };
  const double target = band.lo * k;
  const double ess0 = ess_at(0.0);
  if (ess0 >= target) return GammaChoice{0.0, ess0};
  double below = 0.0;
  double above = 1.0;
  double ess_above = k;
  for (int it = 0; it < 10; ++it) {
    const double mid = 0.5 * (below + above);
    const double e = ess_at(mid);
    if (e >= target) {
      above = mid;
      ess_above = e;
    } else {
      below = mid;
    }
  }
  return GammaChoice{above, ess_above};
}

EnkpfResult pf_update(const Ensemble& ens, const GaussObs& obs,
                      RandomStream& rng) {
  MixtureWeights w = pf_weights(ens, obs);
  ResampleIndices indices = balanced_resample(w, rng);
  Eigen::MatrixXd out(ens.size(), ens.dimension());
  for (Eigen::Index i = 0; i < ens.size(); ++i)
    out.row(i) = ens.members().row(indices.idx[static_cast<std::size_t>(i)]);
  return EnkpfResult{Ensemble(std::move(out), EnsembleKind::kAnalysis),
                     std::move(w), std::move(indices), 0.0};
}

}  // namespace lenkpf
