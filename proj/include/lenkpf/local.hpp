/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <vector>

#include "lenkpf/enkpf.hpp"
#include "lenkpf/ensemble.hpp"
#include "lenkpf/geometry.hpp"
#include "lenkpf/observations.hpp"
#include "lenkpf/random.hpp"
#include "lenkpf/taper.hpp"

namespace lenkpf {

/// Observations within `radius` meters of a grid point are used for its
/// analysis. At radius l = 5 km and dx = 500 m this is 21 grid points.
class LocalWindowSpec {
 public:
  LocalWindowSpec(double radius, GridGeometry geometry);

  double radius() const { return radius_; }
  const GridGeometry& geometry() const { return geometry_; }
  /// Half-width of the window in grid steps.
  Index half_width() const { return half_width_; }
  /// Number of grid points covered by a window.
  Index points() const;
  bool contains(Index center, Index point) const {
    return geometry_.index_distance(center, point) <= half_width_;
  }

 private:
  double radius_;
  GridGeometry geometry_;
  Index half_width_;
};

/// Per-site or per-block diagnostics of a localized analysis.
struct LocalDiagnostics {
  std::vector<double> gammas;
  std::vector<double> ess_fraction;
  /// Final (reordered) resampling indices per grid point; NAIVE only.
  std::vector<ResampleIndices> site_indices;
  long pinv_truncations = 0;
};

struct LocalResult {
  Ensemble analysis;
  LocalDiagnostics diagnostics;
};

/// Observation rows grouped by grid point of the observed column.
std::vector<std::vector<Index>> observations_by_point(const GaussObs& obs,
                                                      const StateLayout& layout);

/// Rows of `obs` inside the window centered at `point`, in row order.
std::vector<Index> window_rows(const std::vector<std::vector<Index>>& by_point,
                               const LocalWindowSpec& window, Index point);

/// Local EnKF: every grid point is analysed with the observations in its
/// window, a tapered local covariance and one global set of perturbed
/// observations.
Ensemble lenkf_update(const Ensemble& ens, const GaussObs& obs,
                      const LocalWindowSpec& window, const TaperSpec& taper,
                      const StateLayout& layout, RandomStream& rng);

/// Same with explicit perturbation draws (k x m standard normals).
Ensemble lenkf_update(const Ensemble& ens, const GaussObs& obs,
                      const LocalWindowSpec& window, const TaperSpec& taper,
                      const StateLayout& layout, const Eigen::MatrixXd& eta);

/// Naive local EnKPF: an independent EnKPF with adaptive gamma at every grid
/// point, sharing the observation draws and the resampling uniform between
/// sites; resampling indices are reordered left to right to agree with the
/// previous site as often as possible.
LocalResult naive_lenkpf_update(const Ensemble& ens, const GaussObs& obs,
                                const LocalWindowSpec& window,
                                const TaperSpec& taper,
                                const StateLayout& layout, const EssBand& band,
                                RandomStream& rng);

LocalResult naive_lenkpf_update(const Ensemble& ens, const GaussObs& obs,
                                const LocalWindowSpec& window,
                                const TaperSpec& taper,
                                const StateLayout& layout, const EssBand& band,
                                const AnalysisNoise& noise);

}  // namespace lenkpf
