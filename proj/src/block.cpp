/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/block.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>

#include "lenkpf/parallel.hpp"

namespace lenkpf {

namespace {

constexpr double kPinvTolerance = 1e-10;

bool disjoint(const std::vector<Index>& a, const std::vector<Index>& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return false;
    if (*i < *j) ++i; else ++j;
  }
  return true;
}

}  // namespace

std::vector<Index> ObservationBlock::touched() const {
  std::vector<Index> out;
  out.reserve(u.size() + v.size());
  std::merge(u.begin(), u.end(), v.begin(), v.end(), std::back_inserter(out));
  return out;
}

ObservationBlock compute_uvw(const GaussObs& block_obs, const TaperSpec& taper,
                             const StateLayout& layout, Index id) {
  if (block_obs.empty()) throw InvalidBlock("observation block is empty");
  block_obs.check_dimension(layout.dimension());
  if (taper.geometry().n_points() != layout.geometry().n_points())
    throw ShapeError("taper and layout use different grids");

  ObservationBlock block;
  block.obs = block_obs;
  block.id = id;
  block.u = block_obs.columns();
  std::sort(block.u.begin(), block.u.end());
  block.u.erase(std::unique(block.u.begin(), block.u.end()), block.u.end());

  std::vector<Index> u_points;
  for (Index c : block.u) u_points.push_back(layout.point(c));
  std::sort(u_points.begin(), u_points.end());
  u_points.erase(std::unique(u_points.begin(), u_points.end()), u_points.end());

  for (Index c = 0; c < layout.dimension(); ++c) {
    if (std::binary_search(block.u.begin(), block.u.end(), c)) continue;
    const Index p = layout.point(c);
    const bool correlated = std::any_of(u_points.begin(), u_points.end(),
                                        [&](Index q) { return taper.weight(p, q) != 0.0; });
    (correlated ? block.v : block.w).push_back(c);
  }
  return block;
}

std::vector<ObservationBlock> partition_blocks(const GaussObs& obs,
                                               const TaperSpec& taper,
                                               const StateLayout& layout,
                                               double segment_length) {
  if (!(segment_length > 0.0))
    throw InvalidParameter("segment length must be positive");
  obs.check_dimension(layout.dimension());
  const double dx = layout.geometry().dx();
  std::map<Index, std::vector<Index>> rows_by_segment;
  for (Index row = 0; row < obs.size(); ++row) {
    const Index p = layout.point(obs.columns()[static_cast<std::size_t>(row)]);
    // Small slack so points on a segment boundary land in the next segment
    // despite round-off in p * dx.
    const auto seg = static_cast<Index>(
        std::floor((static_cast<double>(p) * dx + 1e-9 * dx) / segment_length));
    rows_by_segment[seg].push_back(row);
  }
  std::vector<ObservationBlock> blocks;
  for (const auto& [seg, rows] : rows_by_segment)
    blocks.push_back(compute_uvw(obs.subset(rows), taper, layout, seg));
  return blocks;
}

BlockSchedule schedule_blocks(const std::vector<ObservationBlock>& blocks) {
  std::vector<std::vector<Index>> touched;
  touched.reserve(blocks.size());
  for (const auto& b : blocks) touched.push_back(b.touched());
  std::vector<bool> done(blocks.size(), false);
  BlockSchedule schedule;
  for (std::size_t first = 0; first < blocks.size(); ++first) {
    if (done[first]) continue;
    std::vector<std::size_t> group{first};
    done[first] = true;
    for (std::size_t j = first + 1; j < blocks.size(); ++j) {
      if (done[j]) continue;
      const bool fits = std::all_of(group.begin(), group.end(), [&](std::size_t g) {
        return disjoint(touched[g], touched[j]);
      });
      if (fits) {
        group.push_back(j);
        done[j] = true;
      }
    }
    schedule.groups.push_back(std::move(group));
  }
  return schedule;
}

Eigen::MatrixXd symmetric_pinv(const Eigen::MatrixXd& a, double rel_tol,
                               long* truncated) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double top = lambda.size() > 0 ? lambda.cwiseAbs().maxCoeff() : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
  long dropped = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (top > 0.0 && lambda(i) > rel_tol * top)
      inv(i) = 1.0 / lambda(i);
    else
      ++dropped;
  }
  if (truncated) *truncated = dropped;
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

BlockDiagnostics assimilate_block(Eigen::MatrixXd& members,
                                  const ObservationBlock& block,
                                  const TaperSpec& taper,
                                  const StateLayout& layout,
                                  const BlockOptions& options,
                                  const AnalysisNoise& noise) {
  if (block.u.empty()) throw InvalidBlock("block has no observed columns");
  const Index k = members.rows();
  const std::vector<Index>& u = block.u;
  const std::vector<Index>& v = block.v;

  // Positions of the observed columns inside u.
  std::vector<Index> obs_in_u;
  obs_in_u.reserve(block.obs.columns().size());
  for (Index c : block.obs.columns())
    obs_in_u.push_back(std::lower_bound(u.begin(), u.end(), c) - u.begin());

  const std::vector<Index> touched = block.touched();
  const Eigen::MatrixXd anomalies_uv = scaled_anomalies(members(Eigen::all, touched));
  // tapered_block indexes anomalies by state column; scatter into a full-width
  // view only for the touched columns.
  Eigen::MatrixXd anomalies = Eigen::MatrixXd::Zero(k, layout.dimension());
  anomalies(Eigen::all, touched) = anomalies_uv;
  const Eigen::MatrixXd p_uu = tapered_block(anomalies, u, u, taper, layout);

  LocalProblem problem;
  problem.state = members(Eigen::all, u);
  problem.observed = block.obs.observe(members);
  problem.cov.cross = p_uu(Eigen::all, obs_in_u);
  problem.cov.obs = p_uu(obs_in_u, obs_in_u);
  problem.y = block.obs.y();
  problem.r = block.obs.r_diag();

  BlockDiagnostics diag;
  if (options.fixed_gamma) {
    diag.gamma = *options.fixed_gamma;
    diag.ess_fraction = std::nan("");
  } else {
    const GammaChoice choice = choose_gamma(problem, options.band);
    diag.gamma = choice.gamma;
    diag.ess_fraction = choice.ess / static_cast<double>(k);
  }

  const EnkpfProposal proposal = enkpf_proposal(problem, diag.gamma, noise);
  if (options.identity_resampling || diag.gamma == 1.0)
    diag.indices = ResampleIndices::identity(k);
  else
    diag.indices =
        permute_fixed_points(balanced_resample(proposal.weights, noise.offset));
  const Eigen::MatrixXd xu_a = proposal.assemble(diag.indices);

  if (!v.empty()) {
    const Eigen::MatrixXd p_vu = tapered_block(anomalies, v, u, taper, layout);
    const Eigen::MatrixXd regression =
        p_vu * symmetric_pinv(p_uu, kPinvTolerance, &diag.pinv_truncations);
    const Eigen::MatrixXd increment = xu_a - problem.state;
    members(Eigen::all, v) += increment * regression.transpose();
  }
  members(Eigen::all, u) = xu_a;
  return diag;
}

Ensemble block_assimilate_one(const Ensemble& ens, const ObservationBlock& block,
                              const TaperSpec& taper, const StateLayout& layout,
                              const EssBand& band, RandomStream& rng) {
  if (ens.dimension() != layout.dimension())
    throw ShapeError("ensemble dimension does not match layout");
  Eigen::MatrixXd members = ens.members();
  const AnalysisNoise noise = AnalysisNoise::draw(ens.size(), block.obs.size(), rng);
  BlockOptions options;
  options.band = band;
  assimilate_block(members, block, taper, layout, options, noise);
  return Ensemble(std::move(members), EnsembleKind::kAnalysis);
}

LocalResult block_lenkpf_update(const Ensemble& ens, const GaussObs& obs,
                                const TaperSpec& taper,
                                const StateLayout& layout,
                                double segment_length, const EssBand& band,
                                const RandomStream& rng, std::size_t threads) {
  if (ens.dimension() != layout.dimension())
    throw ShapeError("ensemble dimension does not match layout");
  band.check();
  const Index k = ens.size();
  const std::vector<ObservationBlock> blocks =
      partition_blocks(obs, taper, layout, segment_length);
  const BlockSchedule schedule = schedule_blocks(blocks);

  Eigen::MatrixXd members = ens.members();
  std::vector<BlockDiagnostics> diags(blocks.size());
  BlockOptions options;
  options.band = band;
  for (const auto& group : schedule.groups) {
    parallel_for(group.size(), threads, [&](std::size_t g) {
      const std::size_t b = group[g];
      RandomStream block_rng = rng.split(static_cast<std::uint64_t>(blocks[b].id));
      const AnalysisNoise noise =
          AnalysisNoise::draw(k, blocks[b].obs.size(), block_rng);
      diags[b] = assimilate_block(members, blocks[b], taper, layout, options, noise);
    });
  }

  LocalResult out{Ensemble(std::move(members), EnsembleKind::kAnalysis), {}};
  for (const auto& d : diags) {
    out.diagnostics.gammas.push_back(d.gamma);
    out.diagnostics.ess_fraction.push_back(d.ess_fraction);
    out.diagnostics.pinv_truncations += d.pinv_truncations;
  }
  return out;
}

}  // namespace lenkpf
