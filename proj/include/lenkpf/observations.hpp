/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lenkpf/errors.hpp"

namespace lenkpf {

/// Linear Gaussian observations y = Hx + e, e ~ N(0, diag(r)), where every
/// row of H selects one state column with coefficient 1.
class GaussObs {
 public:
  GaussObs() = default;
  GaussObs(Eigen::VectorXd y, std::vector<Eigen::Index> columns,
           Eigen::VectorXd r_diag)
      : y_(std::move(y)), columns_(std::move(columns)), r_(std::move(r_diag)) {
    if (y_.size() != static_cast<Eigen::Index>(columns_.size()) ||
        y_.size() != r_.size())
      throw ShapeError("observation vectors differ in length");
    for (Eigen::Index i = 0; i < r_.size(); ++i)
      if (!(r_(i) > 0.0) || !std::isfinite(r_(i)))
        throw InvalidParameter("observation error variance must be > 0");
    if (!y_.allFinite()) throw InvalidParameter("non-finite observation");
  }

  Eigen::Index size() const { return y_.size(); }
  bool empty() const { return y_.size() == 0; }
  const Eigen::VectorXd& y() const { return y_; }
  const std::vector<Eigen::Index>& columns() const { return columns_; }
  const Eigen::VectorXd& r_diag() const { return r_; }

  void check_dimension(Eigen::Index state_dim) const {
    for (auto c : columns_)
      if (c < 0 || c >= state_dim)
        throw ShapeError("observation column " + std::to_string(c) +
                         " outside state of dimension " +
                         std::to_string(state_dim));
  }

  /// H applied to every row of a k x d member matrix.
  Eigen::MatrixXd observe(const Eigen::MatrixXd& members) const {
    return members(Eigen::all, columns_);
  }

  GaussObs subset(std::span<const Eigen::Index> rows) const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    Eigen::VectorXd r(y.size());
    std::vector<Eigen::Index> cols;
    cols.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      y(static_cast<Eigen::Index>(i)) = y_(rows[i]);
      r(static_cast<Eigen::Index>(i)) = r_(rows[i]);
      cols.push_back(columns_[static_cast<std::size_t>(rows[i])]);
    }
    return GaussObs(std::move(y), std::move(cols), std::move(r));
  }

 private:
  Eigen::VectorXd y_;
  std::vector<Eigen::Index> columns_;
  Eigen::VectorXd r_;
};

}  // namespace lenkpf
