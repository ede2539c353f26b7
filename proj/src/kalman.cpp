/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/kalman.hpp"

#include <Eigen/Cholesky>

namespace lenkpf {

Eigen::MatrixXd kalman_gain(const ObservedCovariance& pc,
                            const Eigen::VectorXd& r_diag) {
  const auto m = pc.obs.rows();
  if (r_diag.size() != m || pc.cross.cols() != m)
    throw ShapeError("R does not match the number of observations");
  for (Eigen::Index i = 0; i < m; ++i)
    if (!(r_diag(i) > 0.0))
      throw InvalidParameter("observation error variance must be > 0");
  Eigen::MatrixXd s = pc.obs;
  s.diagonal() += r_diag;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  return ldlt.solve(pc.cross.transpose()).transpose();
}

}  // namespace lenkpf
