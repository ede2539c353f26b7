/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lenkpf/ensemble.hpp"
#include "lenkpf/observations.hpp"
#include "lenkpf/random.hpp"

namespace lenkpf {

/// Normalized nonnegative mixture weights.
class MixtureWeights {
 public:
  /// Normalizes `alpha`; throws if it has a negative or non-finite entry or
  /// sums to zero.
  explicit MixtureWeights(Eigen::VectorXd alpha);

  static MixtureWeights uniform(Eigen::Index k) {
    return MixtureWeights(Eigen::VectorXd::Constant(k, 1.0));
  }
  /// Weights proportional to exp(log_w), evaluated with max-subtraction.
  static MixtureWeights from_log(const Eigen::VectorXd& log_w);

  Eigen::Index size() const { return alpha_.size(); }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double operator[](Eigen::Index i) const { return alpha_(i); }

 private:
  Eigen::VectorXd alpha_;
};

/// Resampled indices I (0-based): member i of the analysis is built from
/// mixture component idx[i].
struct ResampleIndices {
  std::vector<Eigen::Index> idx;

  static ResampleIndices identity(Eigen::Index k);
  Eigen::Index size() const { return static_cast<Eigen::Index>(idx.size()); }
  /// N_j = #{i : I(i) = j}, for j up to max(k, largest index + 1).
  std::vector<Eigen::Index> counts() const;
  Eigen::Index fixed_points() const;
  bool operator==(const ResampleIndices&) const = default;
};

/// Effective sample size 1 / sum(alpha^2).
double ess(const MixtureWeights& w);

/// alpha_i proportional to l(x_i | y)^power, Gaussian likelihood with
/// diagonal R.
MixtureWeights pf_weights(const Ensemble& ens, const GaussObs& obs,
                          double likelihood_power = 1.0);

/// Systematic resampling with offset `offset` in [0, 1): pointers
/// (offset + i) / k against the cumulative weights. Indices come out sorted
/// and satisfy floor(k alpha_j) <= N_j <= ceil(k alpha_j).
ResampleIndices balanced_resample(const MixtureWeights& w, double offset);
/// Same with k draws from a mixture of any size (pointers (offset + i) / k).
ResampleIndices balanced_resample(const MixtureWeights& w, double offset,
                                  Eigen::Index k);
ResampleIndices balanced_resample(const MixtureWeights& w, RandomStream& rng);

/// Permutation of `indices` that maximizes #{i : I(i) = i}. Each selected j
/// goes to position j; the remaining copies fill free positions in
/// ascending order.
ResampleIndices permute_fixed_points(const ResampleIndices& indices);

/// Permutation of `indices` that maximizes #{i : I(i) = reference(i)},
/// filling the rest as permute_fixed_points does.
ResampleIndices reorder_to_match(const ResampleIndices& indices,
                                 const ResampleIndices& reference);

}  // namespace lenkpf
