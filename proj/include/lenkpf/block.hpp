/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <optional>
#include <vector>

#include "lenkpf/enkpf.hpp"
#include "lenkpf/local.hpp"
#include "lenkpf/taper.hpp"

namespace lenkpf {

/// A block of observations and the induced split of the state columns:
///   u  columns observed directly by the block,
///   v  columns outside u with a nonzero taper weight to some column of u,
///   w  everything else.
/// All three are sorted.
struct ObservationBlock {
  GaussObs obs;
  Index id = 0;
  std::vector<Index> u;
  std::vector<Index> v;
  std::vector<Index> w;

  /// Sorted u followed by v (the columns a block analysis may touch).
  std::vector<Index> touched() const;
};

ObservationBlock compute_uvw(const GaussObs& block_obs, const TaperSpec& taper,
                             const StateLayout& layout, Index id = 0);

/// Blocks from consecutive segments of `segment_length` meters: each block
/// holds every observation located in its segment. Empty segments are
/// skipped; block ids are segment numbers.
std::vector<ObservationBlock> partition_blocks(const GaussObs& obs,
                                               const TaperSpec& taper,
                                               const StateLayout& layout,
                                               double segment_length);

/// Groups of blocks (positions into the block list) that can be assimilated
/// together because their u and v sets do not intersect.
struct BlockSchedule {
  std::vector<std::vector<std::size_t>> groups;
};

/// Greedy grouping: each group starts at the lowest unscheduled block and
/// takes every later unscheduled block disjoint from all current members.
BlockSchedule schedule_blocks(const std::vector<ObservationBlock>& blocks);

struct BlockOptions {
  EssBand band;
  /// Use this gamma instead of the adaptive choice.
  std::optional<double> fixed_gamma;
  /// Force I(i) = i; for comparisons against the whole-state EnKPF.
  bool identity_resampling = false;
};

struct BlockDiagnostics {
  double gamma = 1.0;
  double ess_fraction = 1.0;
  long pinv_truncations = 0;
  ResampleIndices indices;
};

/// Assimilates one block in place: EnKPF on x_u with the tapered P_uu,
/// fixed-point permutation of the resampling indices, then
/// x_v += P_vu P_uu^+ (x_u^a - x_u^b). Columns in w are not touched.
BlockDiagnostics assimilate_block(Eigen::MatrixXd& members,
                                  const ObservationBlock& block,
                                  const TaperSpec& taper,
                                  const StateLayout& layout,
                                  const BlockOptions& options,
                                  const AnalysisNoise& noise);

Ensemble block_assimilate_one(const Ensemble& ens, const ObservationBlock& block,
                              const TaperSpec& taper, const StateLayout& layout,
                              const EssBand& band, RandomStream& rng);

/// Pseudo-inverse of a symmetric matrix by eigendecomposition, dropping
/// eigenvalues below `rel_tol` times the largest one. `truncated` receives
/// the number of dropped eigenvalues.
Eigen::MatrixXd symmetric_pinv(const Eigen::MatrixXd& a, double rel_tol,
                               long* truncated = nullptr);

/// Full block-localized EnKPF: partition, schedule, then assimilate group by
/// group. Blocks of one group run on up to `threads` threads; each block
/// draws from rng.split(block id), so the result does not depend on the
/// thread count.
LocalResult block_lenkpf_update(const Ensemble& ens, const GaussObs& obs,
                                const TaperSpec& taper,
                                const StateLayout& layout,
                                double segment_length, const EssBand& band,
                                const RandomStream& rng,
                                std::size_t threads = 1);

}  // namespace lenkpf
