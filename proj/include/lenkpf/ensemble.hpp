/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <string>
#include <utility>

#include <Eigen/Core>

#include "lenkpf/errors.hpp"

namespace lenkpf {

enum class EnsembleKind { kBackground, kAnalysis };

/// k members of dimension d, stored as a k x d matrix (one row per member).
class Ensemble {
 public:
  explicit Ensemble(Eigen::MatrixXd members,
                    EnsembleKind kind = EnsembleKind::kBackground)
      : members_(std::move(members)), kind_(kind) {
    if (members_.rows() < 2)
      throw InsufficientEnsemble("ensemble needs at least 2 members, got " +
                                 std::to_string(members_.rows()));
    if (!members_.allFinite())
      throw InvalidParameter("ensemble contains non-finite values");
  }

  Eigen::Index size() const { return members_.rows(); }
  Eigen::Index dimension() const { return members_.cols(); }
  const Eigen::MatrixXd& members() const { return members_; }
  EnsembleKind kind() const { return kind_; }

  Ensemble as(EnsembleKind kind) const { return Ensemble(members_, kind); }

 private:
  Eigen::MatrixXd members_;
  EnsembleKind kind_;
};

template <typename Scalar>
struct Moments {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov;
};

/// Member deviations from the sample mean, scaled by 1/sqrt(k-1) so that
/// A'A is the unbiased sample covariance.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
scaled_anomalies(const Eigen::MatrixBase<Derived>& members) {
  using Scalar = typename Derived::Scalar;
  const auto k = members.rows();
  if (k < 2) throw InsufficientEnsemble("anomalies need at least 2 members");
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean =
      members.colwise().mean();
  return (members.rowwise() - mean) / std::sqrt(static_cast<Scalar>(k - 1));
}

/// Sample mean and unbiased (k-1) sample covariance of the rows of `members`.
template <typename Derived>
Moments<typename Derived::Scalar> ensemble_moments(
    const Eigen::MatrixBase<Derived>& members) {
  using Scalar = typename Derived::Scalar;
  if (members.rows() < 2)
    throw InsufficientEnsemble("moments need at least 2 members");
  Moments<Scalar> out;
  out.mean = members.colwise().mean().transpose();
  const auto anomalies = scaled_anomalies(members);
  out.cov = anomalies.transpose() * anomalies;
  return out;
}

inline Moments<double> ensemble_moments(const Ensemble& ens) {
  return ensemble_moments(ens.members());
}

}  // namespace lenkpf
