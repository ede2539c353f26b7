/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <span>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lenkpf/errors.hpp"

namespace lenkpf {

/// P H' and H P H' for a column-selecting H. Every filter only ever needs P
/// through these two products.
struct ObservedCovariance {
  Eigen::MatrixXd cross;  ///< rows of the analysed state x m
  Eigen::MatrixXd obs;    ///< m x m
};

template <typename MatrixType>
ObservedCovariance observe_covariance(const Eigen::EigenBase<MatrixType>& p,
                                      std::span<const Eigen::Index> columns) {
  const auto& pm = p.derived();
  if (pm.rows() != pm.cols()) throw ShapeError("covariance must be square");
  const auto m = static_cast<Eigen::Index>(columns.size());
  ObservedCovariance out;
  out.cross.resize(pm.rows(), m);
  out.obs.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto cj = columns[static_cast<std::size_t>(j)];
    if (cj < 0 || cj >= pm.cols()) throw ShapeError("H column out of range");
    out.cross.col(j) = pm.col(cj);
  }
  for (Eigen::Index i = 0; i < m; ++i)
    out.obs.row(i) = out.cross.row(columns[static_cast<std::size_t>(i)]);
  return out;
}

/// K = P H' (H P H' + R)^-1 given the observed covariance products.
/// Solves the m x m symmetric system; never inverts anything.
Eigen::MatrixXd kalman_gain(const ObservedCovariance& pc,
                            const Eigen::VectorXd& r_diag);

template <typename MatrixType>
Eigen::MatrixXd kalman_gain(const Eigen::EigenBase<MatrixType>& p,
                            std::span<const Eigen::Index> columns,
                            const Eigen::VectorXd& r_diag) {
  return kalman_gain(observe_covariance(p, columns), r_diag);
}

}  // namespace lenkpf
