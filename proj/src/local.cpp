/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/local.hpp"

#include <algorithm>
#include <cmath>

namespace lenkpf {

LocalWindowSpec::LocalWindowSpec(double radius, GridGeometry geometry)
    : radius_(radius), geometry_(geometry) {
  if (!(radius >= 0.0)) throw InvalidParameter("window radius must be >= 0");
  const double steps = std::floor(radius / geometry.dx() + 1e-9);
  half_width_ = steps >= static_cast<double>(geometry.n_points())
                    ? geometry.n_points()
                    : static_cast<Index>(steps);
}

Index LocalWindowSpec::points() const {
  return std::min(2 * half_width_ + 1, geometry_.n_points());
}

std::vector<std::vector<Index>> observations_by_point(const GaussObs& obs,
                                                      const StateLayout& layout) {
  obs.check_dimension(layout.dimension());
  std::vector<std::vector<Index>> out(
      static_cast<std::size_t>(layout.geometry().n_points()));
  for (Index row = 0; row < obs.size(); ++row)
    out[static_cast<std::size_t>(
            layout.point(obs.columns()[static_cast<std::size_t>(row)]))]
        .push_back(row);
  return out;
}

std::vector<Index> window_rows(const std::vector<std::vector<Index>>& by_point,
                               const LocalWindowSpec& window, Index point) {
  std::vector<Index> rows;
  const Index n = static_cast<Index>(by_point.size());
  for (Index p = 0; p < n; ++p)
    if (window.contains(point, p))
      rows.insert(rows.end(), by_point[static_cast<std::size_t>(p)].begin(),
                  by_point[static_cast<std::size_t>(p)].end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

namespace {

// Local problem for the columns at `point` against observation rows `rows`.
LocalProblem site_problem(const Eigen::MatrixXd& members,
                          const Eigen::MatrixXd& anomalies,
                          const std::vector<Index>& site_cols,
                          const GaussObs& obs, const std::vector<Index>& rows,
                          const TaperSpec& taper, const StateLayout& layout) {
  const GaussObs local = obs.subset(rows);
  LocalProblem problem;
  problem.state = members(Eigen::all, site_cols);
  problem.observed = local.observe(members);
  problem.cov.cross =
      tapered_block(anomalies, site_cols, local.columns(), taper, layout);
  problem.cov.obs =
      tapered_block(anomalies, local.columns(), local.columns(), taper, layout);
  problem.y = local.y();
  problem.r = local.r_diag();
  return problem;
}

void check_inputs(const Ensemble& ens, const GaussObs& obs,
                  const LocalWindowSpec& window, const TaperSpec& taper,
                  const StateLayout& layout) {
  if (ens.dimension() != layout.dimension())
    throw ShapeError("ensemble dimension does not match layout");
  obs.check_dimension(ens.dimension());
  if (window.geometry().n_points() != layout.geometry().n_points() ||
      taper.geometry().n_points() != layout.geometry().n_points())
    throw ShapeError("window, taper and layout use different grids");
}

}  // namespace

Ensemble lenkf_update(const Ensemble& ens, const GaussObs& obs,
                      const LocalWindowSpec& window, const TaperSpec& taper,
                      const StateLayout& layout, RandomStream& rng) {
  return lenkf_update(ens, obs, window, taper, layout,
                      rng.normal_matrix(ens.size(), obs.size()));
}

Ensemble lenkf_update(const Ensemble& ens, const GaussObs& obs,
                      const LocalWindowSpec& window, const TaperSpec& taper,
                      const StateLayout& layout, const Eigen::MatrixXd& eta) {
  check_inputs(ens, obs, window, taper, layout);
  if (eta.rows() != ens.size() || eta.cols() != obs.size())
    throw ShapeError("perturbation matrix has the wrong shape");
  const Eigen::MatrixXd& xb = ens.members();
  const Eigen::MatrixXd anomalies = scaled_anomalies(xb);
  const auto by_point = observations_by_point(obs, layout);
  Eigen::MatrixXd xa = xb;
  for (Index g = 0; g < layout.geometry().n_points(); ++g) {
    const std::vector<Index> rows = window_rows(by_point, window, g);
    if (rows.empty()) continue;
    const std::vector<Index> cols = layout.columns_at(g);
    const LocalProblem problem =
        site_problem(xb, anomalies, cols, obs, rows, taper, layout);
    xa(Eigen::all, cols) = perturbed_obs_update(problem, eta(Eigen::all, rows));
  }
  return Ensemble(std::move(xa), EnsembleKind::kAnalysis);
}

LocalResult naive_lenkpf_update(const Ensemble& ens, const GaussObs& obs,
                                const LocalWindowSpec& window,
                                const TaperSpec& taper,
                                const StateLayout& layout, const EssBand& band,
                                RandomStream& rng) {
  return naive_lenkpf_update(ens, obs, window, taper, layout, band,
                             AnalysisNoise::draw(ens.size(), obs.size(), rng));
}

LocalResult naive_lenkpf_update(const Ensemble& ens, const GaussObs& obs,
                                const LocalWindowSpec& window,
                                const TaperSpec& taper,
                                const StateLayout& layout, const EssBand& band,
                                const AnalysisNoise& noise) {
  check_inputs(ens, obs, window, taper, layout);
  band.check();
  const Index k = ens.size();
  const Index n = layout.geometry().n_points();
  const Eigen::MatrixXd& xb = ens.members();
  const Eigen::MatrixXd anomalies = scaled_anomalies(xb);
  const auto by_point = observations_by_point(obs, layout);

  // Independent site analyses.
  struct Site {
    bool active = false;
    EnkpfProposal proposal;
    ResampleIndices indices;
  };
  std::vector<Site> sites(static_cast<std::size_t>(n));
  LocalResult out{Ensemble(xb, EnsembleKind::kAnalysis), {}};
  for (Index g = 0; g < n; ++g) {
    const std::vector<Index> rows = window_rows(by_point, window, g);
    if (rows.empty()) continue;
    Site& site = sites[static_cast<std::size_t>(g)];
    const LocalProblem problem = site_problem(
        xb, anomalies, layout.columns_at(g), obs, rows, taper, layout);
    const GammaChoice choice = choose_gamma(problem, band);
    site.active = true;
    site.proposal = enkpf_proposal(problem, choice.gamma, noise.select(rows));
    site.indices = choice.gamma == 1.0
                       ? ResampleIndices::identity(k)
                       : balanced_resample(site.proposal.weights, noise.offset);
    out.diagnostics.gammas.push_back(choice.gamma);
    out.diagnostics.ess_fraction.push_back(choice.ess / static_cast<double>(k));
  }

  // Reordering sweep. Sites without observations, and gamma = 1 sites whose
  // centers carry member-specific perturbations, keep the identity.
  Eigen::MatrixXd xa = xb;
  ResampleIndices previous = ResampleIndices::identity(k);
  out.diagnostics.site_indices.reserve(static_cast<std::size_t>(n));
  for (Index g = 0; g < n; ++g) {
    Site& site = sites[static_cast<std::size_t>(g)];
    if (!site.active) {
      previous = ResampleIndices::identity(k);
    } else {
      if (site.proposal.gamma < 1.0)
        site.indices = reorder_to_match(site.indices, previous);
      previous = site.indices;
      xa(Eigen::all, layout.columns_at(g)) = site.proposal.assemble(site.indices);
    }
    out.diagnostics.site_indices.push_back(previous);
  }
  out.analysis = Ensemble(std::move(xa), EnsembleKind::kAnalysis);
  return out;
}

}  // namespace lenkpf
