/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lenkpf/ensemble.hpp"
#include "lenkpf/errors.hpp"
#include "lenkpf/geometry.hpp"

namespace lenkpf {

/// Gaspari-Cohn fifth-order piecewise rational correlation.
///
/// `c` is the half-length: the function is 1 at zero lag and vanishes for
/// distance >= 2c. An infinite `c` gives weight 1 everywhere.
template <typename Scalar>
Scalar gaspari_cohn(Scalar distance, Scalar c) {
  if (!(c > Scalar(0))) throw InvalidParameter("Gaspari-Cohn c must be > 0");
  if (!(distance >= Scalar(0)))
    throw InvalidParameter("Gaspari-Cohn distance must be >= 0");
  const Scalar z = distance / c;
  if (z >= Scalar(2)) return Scalar(0);
  if (z <= Scalar(1)) {
    return (((-Scalar(1) / 4 * z + Scalar(1) / 2) * z + Scalar(5) / 8) * z -
            Scalar(5) / 3) * z * z + Scalar(1);
  }
  const Scalar poly = ((((Scalar(1) / 12 * z - Scalar(1) / 2) * z +
                         Scalar(5) / 8) * z + Scalar(5) / 3) * z - Scalar(5)) *
                          z + Scalar(4);
  const Scalar value = poly - Scalar(2) / (Scalar(3) * z);
  // The quintic tail loses a few ulps near z = 2.
  return value > Scalar(0) ? value : Scalar(0);
}

/// Gaspari-Cohn taper with half-length `half_length` on a periodic grid.
/// Weights depend on spatial distance only, so all variables at one grid
/// point correlate with weight 1.
class TaperSpec {
 public:
  TaperSpec(double half_length, GridGeometry geometry);

  /// Taper with weight 1 everywhere (no localization).
  static TaperSpec unlimited(GridGeometry geometry) {
    return TaperSpec(INFINITY, geometry);
  }

  double half_length() const { return half_length_; }
  const GridGeometry& geometry() const { return geometry_; }

  double weight(Index point_a, Index point_b) const {
    return by_steps_[static_cast<std::size_t>(
        geometry_.index_distance(point_a, point_b))];
  }

  /// Largest index distance with a nonzero weight.
  Index support_steps() const { return support_steps_; }

 private:
  double half_length_;
  GridGeometry geometry_;
  std::vector<double> by_steps_;
  Index support_steps_ = 0;
};

/// Taper matrix C over the columns of `layout`.
Eigen::SparseMatrix<double> taper_matrix(const TaperSpec& taper,
                                         const StateLayout& layout);

/// Sample covariance of `ens` multiplied entrywise by the taper matrix.
/// Entries where the taper vanishes are not stored.
Eigen::SparseMatrix<double> tapered_covariance(const Ensemble& ens,
                                               const TaperSpec& taper,
                                               const StateLayout& layout);

/// Dense (C o P)(rows, cols) computed from scaled anomalies (see
/// scaled_anomalies); used by the local filters to avoid forming P.
Eigen::MatrixXd tapered_block(const Eigen::MatrixXd& anomalies,
                              std::span<const Index> rows,
                              std::span<const Index> cols,
                              const TaperSpec& taper,
                              const StateLayout& layout);

}  // namespace lenkpf
