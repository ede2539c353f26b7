/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <Eigen/Core>

#include "lenkpf/ensemble.hpp"
#include "lenkpf/kalman.hpp"
#include "lenkpf/observations.hpp"
#include "lenkpf/random.hpp"
#include "lenkpf/resampling.hpp"

namespace lenkpf {

/// Standard normal draws consumed by one EnKF / EnKPF analysis.
///
/// `eta` feeds the observation perturbations of the EnKF and the N(0, Q)
/// draws of the EnKPF; `resid` feeds the N(0, R / (1 - gamma)) draws of the
/// second stage; `offset` is the shared uniform of the balanced resampling.
/// Local filters share one AnalysisNoise across all sites.
struct AnalysisNoise {
  Eigen::MatrixXd eta;
  Eigen::MatrixXd resid;
  double offset = 0.0;

  /// Draws eta, then resid, then offset (this order is part of the
  /// reproducibility contract).
  static AnalysisNoise draw(Eigen::Index k, Eigen::Index m, RandomStream& rng);

  /// Columns `rows` of the observation draws.
  AnalysisNoise select(std::span<const Eigen::Index> rows) const;
};

/// Analysis of a subset S of the state columns against observations y.
/// Covariances enter only as P_{S,obs} and H P H'.
struct LocalProblem {
  Eigen::MatrixXd state;     ///< k x s, x_S of every member
  Eigen::MatrixXd observed;  ///< k x m, H x of every member
  ObservedCovariance cov;    ///< cross: s x m, obs: m x m
  Eigen::VectorXd y;
  Eigen::VectorXd r;

  Eigen::Index members() const { return state.rows(); }
  Eigen::Index observations() const { return y.size(); }
  void check() const;
};

/// Whole-state problem for an ensemble, observations and covariance P.
template <typename MatrixType>
LocalProblem global_problem(const Ensemble& ens, const GaussObs& obs,
                            const Eigen::EigenBase<MatrixType>& p) {
  obs.check_dimension(ens.dimension());
  if (p.rows() != ens.dimension() || p.cols() != ens.dimension())
    throw ShapeError("covariance does not match the state dimension");
  return LocalProblem{ens.members(), obs.observe(ens.members()),
                      observe_covariance(p, obs.columns()), obs.y(),
                      obs.r_diag()};
}

/// Stochastic EnKF: x_i + K (y - H x_i + sqrt(R) eta_i).
Eigen::MatrixXd perturbed_obs_update(const LocalProblem& problem,
                                     const Eigen::MatrixXd& eta);

template <typename MatrixType>
Ensemble enkf_update(const Ensemble& ens, const GaussObs& obs,
                     const Eigen::EigenBase<MatrixType>& p, RandomStream& rng) {
  const LocalProblem problem = global_problem(ens, obs, p);
  const Eigen::MatrixXd eta = rng.normal_matrix(ens.size(), obs.size());
  return Ensemble(perturbed_obs_update(problem, eta), EnsembleKind::kAnalysis);
}

/// First EnKPF stage: the mixture sum_i N(nu_i, Q) / k.
///
/// With S = gamma H P H' + R the gain is K(gamma P) = gamma P H' S^-1 and
/// Q = gamma P H' S^-1 R S^-1 H P. Keeping the factor P H' S^-1 lets gamma = 0
/// give exactly Q = 0 and nu = x without dividing by gamma.
class EnkpfIntermediate {
 public:
  EnkpfIntermediate(const LocalProblem& problem, double gamma);

  double gamma() const { return gamma_; }
  const Eigen::MatrixXd& nu() const { return nu_; }
  const Eigen::MatrixXd& nu_observed() const { return nu_observed_; }
  /// K(gamma P) restricted to the analysed columns (s x m).
  Eigen::MatrixXd gain() const { return gamma_ * factor_; }
  /// Q H' (s x m).
  Eigen::MatrixXd q_cross() const;
  /// H Q H' (m x m).
  Eigen::MatrixXd q_observed() const;
  /// Q over the analysed columns (s x s); for tests and diagnostics.
  Eigen::MatrixXd q_matrix() const;
  /// Rows are draws from N(0, Q), built from standard normals `eta` (k x m).
  Eigen::MatrixXd draw_q(const Eigen::MatrixXd& eta) const;
  /// H applied to draw_q(eta).
  Eigen::MatrixXd draw_q_observed(const Eigen::MatrixXd& eta) const;
  const Eigen::VectorXd& r() const { return r_; }

 private:
  double gamma_;
  Eigen::MatrixXd factor_;           // P_{S,obs} S^-1
  Eigen::MatrixXd factor_observed_;  // H P H' S^-1
  Eigen::MatrixXd nu_;
  Eigen::MatrixXd nu_observed_;
  Eigen::VectorXd r_;
};

template <typename MatrixType>
EnkpfIntermediate enkpf_stage1(const Ensemble& ens, const GaussObs& obs,
                               const Eigen::EigenBase<MatrixType>& p,
                               double gamma) {
  return EnkpfIntermediate(global_problem(ens, obs, p), gamma);
}

/// alpha_i proportional to phi(y; H nu_i, H Q H' + R / (1 - gamma)); uniform
/// at gamma = 1.
MixtureWeights enkpf_weights(const EnkpfIntermediate& inter,
                             const Eigen::VectorXd& y);
inline MixtureWeights enkpf_weights(const EnkpfIntermediate& inter,
                                    const GaussObs& obs) {
  return enkpf_weights(inter, obs.y());
}

/// Same weights computed from observation-space quantities only; this is
/// what the adaptive gamma search evaluates.
MixtureWeights enkpf_weights_observed(const Eigen::MatrixXd& observed,
                                      const Eigen::MatrixXd& obs_cov,
                                      const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& r, double gamma);

/// Everything needed to sample the EnKPF analysis mixture except the
/// resampling indices: x_i = centers_{I(i)} + perturbations_i.
struct EnkpfProposal {
  double gamma = 1.0;
  MixtureWeights weights = MixtureWeights::uniform(1);
  Eigen::MatrixXd centers;        ///< mu (k x s)
  Eigen::MatrixXd perturbations;  ///< draws from N(0, P^{a,gamma}) (k x s)

  Eigen::MatrixXd assemble(const ResampleIndices& indices) const;
};

/// mu_i = nu_i + K((1-gamma) Q)(y - H nu_i) and eps_i = (I - K2 H) e_Q + K2 e_R
/// with e_Q ~ N(0, Q), e_R ~ N(0, R / (1 - gamma)). At gamma = 1 the centers
/// are the perturbed-observation EnKF analysis, perturbations are zero and
/// the weights uniform, so identity resampling reproduces the EnKF exactly.
EnkpfProposal enkpf_proposal(const LocalProblem& problem, double gamma,
                             const AnalysisNoise& noise);

struct EnkpfResult {
  Ensemble analysis;
  MixtureWeights weights;
  ResampleIndices indices;
  double gamma = 1.0;
};

/// Full EnKPF analysis on a problem with explicit noise.
EnkpfResult enkpf_analysis(const LocalProblem& problem, double gamma,
                           const AnalysisNoise& noise);

template <typename MatrixType>
EnkpfResult enkpf_update(const Ensemble& ens, const GaussObs& obs,
                         const Eigen::EigenBase<MatrixType>& p, double gamma,
                         RandomStream& rng) {
  const LocalProblem problem = global_problem(ens, obs, p);
  if (gamma == 1.0) {
    // Same stream consumption as enkf_update.
    const Eigen::MatrixXd eta = rng.normal_matrix(ens.size(), obs.size());
    return EnkpfResult{
        Ensemble(perturbed_obs_update(problem, eta), EnsembleKind::kAnalysis),
        MixtureWeights::uniform(ens.size()),
        ResampleIndices::identity(ens.size()), 1.0};
  }
  return enkpf_analysis(problem, gamma,
                        AnalysisNoise::draw(ens.size(), obs.size(), rng));
}

/// Acceptable range of ESS / k for the adaptive choice of gamma.
struct EssBand {
  double lo = 0.5;
  double hi = 0.8;
  void check() const;
};

struct GammaChoice {
  double gamma = 0.0;
  double ess = 0.0;  ///< ESS of the EnKPF weights at `gamma`
};

/// Smallest gamma (bisection on [0, 1], 10 halvings) whose EnKPF weights
/// reach ESS >= lo * k. Returns 0 when gamma = 0 already does.
GammaChoice choose_gamma(const LocalProblem& problem, const EssBand& band);

struct AdaptiveResult {
  GammaChoice choice;
  EnkpfResult result;
};

template <typename MatrixType>
AdaptiveResult adaptive_gamma(const Ensemble& ens, const GaussObs& obs,
                              const Eigen::EigenBase<MatrixType>& p,
                              const EssBand& band, RandomStream& rng) {
  const LocalProblem problem = global_problem(ens, obs, p);
  const GammaChoice choice = choose_gamma(problem, band);
  return AdaptiveResult{choice, enkpf_update(ens, obs, p, choice.gamma, rng)};
}

/// Particle filter analysis: balanced resampling of the background.
EnkpfResult pf_update(const Ensemble& ens, const GaussObs& obs,
                      RandomStream& rng);

}  // namespace lenkpf
