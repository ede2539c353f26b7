/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/taper.hpp"

#include <vector>

namespace lenkpf {

TaperSpec::TaperSpec(double half_length, GridGeometry geometry)
    : half_length_(half_length), geometry_(geometry) {
  if (!(half_length > 0.0))
    throw InvalidParameter("taper half-length must be positive");
  const Index max_steps = geometry_.n_points() / 2;
  by_steps_.resize(static_cast<std::size_t>(max_steps) + 1);
  for (Index s = 0; s <= max_steps; ++s) {
    const double w =
        gaspari_cohn(static_cast<double>(s) * geometry_.dx(), half_length_);
    by_steps_[static_cast<std::size_t>(s)] = w;
    if (w > 0.0) support_steps_ = s;
  }
}

namespace {

void check_layout(const TaperSpec& taper, const StateLayout& layout) {
  if (layout.geometry().n_points() != taper.geometry().n_points())
    throw ShapeError("taper and layout use different grids");
}

}  // namespace

Eigen::SparseMatrix<double> taper_matrix(const TaperSpec& taper,
                                         const StateLayout& layout) {
  check_layout(taper, layout);
  const Index d = layout.dimension();
  std::vector<Eigen::Triplet<double>> entries;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) {
      const double w = taper.weight(layout.point(i), layout.point(j));
      if (w != 0.0) entries.emplace_back(i, j, w);
    }
  Eigen::SparseMatrix<double> c(d, d);
  c.setFromTriplets(entries.begin(), entries.end());
  return c;
}

Eigen::SparseMatrix<double> tapered_covariance(const Ensemble& ens,
                                               const TaperSpec& taper,
                                               const StateLayout& layout) {
  check_layout(taper, layout);
  if (ens.dimension() != layout.dimension())
    throw ShapeError("ensemble dimension does not match layout");
  const Eigen::MatrixXd a = scaled_anomalies(ens.members());
  const Index d = layout.dimension();
  std::vector<Eigen::Triplet<double>> entries;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) {
      const double w = taper.weight(layout.point(i), layout.point(j));
      if (w != 0.0) entries.emplace_back(i, j, w * a.col(i).dot(a.col(j)));
    }
  Eigen::SparseMatrix<double> p(d, d);
  p.setFromTriplets(entries.begin(), entries.end());
  return p;
}

Eigen::MatrixXd tapered_block(const Eigen::MatrixXd& anomalies,
                              std::span<const Index> rows,
                              std::span<const Index> cols,
                              const TaperSpec& taper,
                              const StateLayout& layout) {
  const auto nr = static_cast<Index>(rows.size());
  const auto nc = static_cast<Index>(cols.size());
  Eigen::MatrixXd out(nr, nc);
  for (Index j = 0; j < nc; ++j) {
    const Index cj = cols[static_cast<std::size_t>(j)];
    for (Index i = 0; i < nr; ++i) {
      const Index ri = rows[static_cast<std::size_t>(i)];
      const double w = taper.weight(layout.point(ri), layout.point(cj));
      out(i, j) = w == 0.0 ? 0.0 : w * anomalies.col(ri).dot(anomalies.col(cj));
    }
  }
  return out;
}

}  // namespace lenkpf
