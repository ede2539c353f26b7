/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cmath>
#include <cstdlib>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lenkpf/errors.hpp"

namespace lenkpf {

using Index = Eigen::Index;

/// Regular periodic 1D grid.
class GridGeometry {
 public:
  GridGeometry(Index n_points, double dx) : n_points_(n_points), dx_(dx) {
    if (n_points < 2) throw InvalidParameter("grid needs at least 2 points");
    if (!(dx > 0.0) || !std::isfinite(dx))
      throw InvalidParameter("grid spacing must be positive");
  }

  /// Grid covering `length` meters at spacing `dx` (length must be a multiple).
  static GridGeometry from_length(double length, double dx) {
    const double n = std::round(length / dx);
    if (std::abs(n * dx - length) > 1e-9 * length)
      throw InvalidParameter("domain length is not a multiple of dx");
    return GridGeometry(static_cast<Index>(n), dx);
  }

  Index n_points() const { return n_points_; }
  double dx() const { return dx_; }
  double length() const { return static_cast<double>(n_points_) * dx_; }
  bool periodic() const { return true; }

  /// Number of grid steps between two points, wrapping around the ring.
  Index index_distance(Index i, Index j) const {
    const Index d = std::abs(i - j) % n_points_;
    return std::min(d, n_points_ - d);
  }

  double distance(Index i, Index j) const {
    return static_cast<double>(index_distance(i, j)) * dx_;
  }

  Index wrap(Index i) const {
    const Index r = i % n_points_;
    return r < 0 ? r + n_points_ : r;
  }

 private:
  Index n_points_;
  double dx_;
};

/// Location of each state column on the grid.
///
/// SWEQ states are stacked by field, (h_1..h_n, u_1..u_n, r_1..r_n), which is
/// what stacked() builds. Tests use arbitrary layouts.
class StateLayout {
 public:
  StateLayout(GridGeometry geometry, std::vector<Index> point_of_column)
      : geometry_(geometry), point_(std::move(point_of_column)) {
    for (Index p : point_)
      if (p < 0 || p >= geometry_.n_points())
        throw ShapeError("layout column mapped outside the grid");
  }

  static StateLayout stacked(GridGeometry geometry, Index n_fields) {
    std::vector<Index> pts;
    pts.reserve(static_cast<std::size_t>(n_fields * geometry.n_points()));
    for (Index f = 0; f < n_fields; ++f)
      for (Index p = 0; p < geometry.n_points(); ++p) pts.push_back(p);
    StateLayout out(geometry, std::move(pts));
    out.n_fields_ = n_fields;
    return out;
  }

  const GridGeometry& geometry() const { return geometry_; }
  Index dimension() const { return static_cast<Index>(point_.size()); }
  Index point(Index column) const {
    return point_[static_cast<std::size_t>(column)];
  }
  const std::vector<Index>& points() const { return point_; }

  /// Number of stacked fields, or 0 for a free-form layout.
  Index n_fields() const { return n_fields_; }
  /// Column of (field, point) in a stacked layout.
  Index column(Index field, Index point) const {
    return field * geometry_.n_points() + point;
  }

  /// All columns located at a grid point.
  std::vector<Index> columns_at(Index point) const {
    std::vector<Index> out;
    if (n_fields_ > 0) {
      for (Index f = 0; f < n_fields_; ++f) out.push_back(column(f, point));
      return out;
    }
    for (Index c = 0; c < dimension(); ++c)
      if (point_[static_cast<std::size_t>(c)] == point) out.push_back(c);
    return out;
  }

 private:
  GridGeometry geometry_;
  std::vector<Index> point_;
  Index n_fields_ = 0;
};

}  // namespace lenkpf
