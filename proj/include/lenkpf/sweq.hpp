/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Core>

#include "lenkpf/ensemble.hpp"
#include "lenkpf/geometry.hpp"
#include "lenkpf/observations.hpp"
#include "lenkpf/random.hpp"

namespace lenkpf {

/// Modified shallow-water convection model on a periodic 1D grid.
///
/// Units are arbitrary. Apart from h_c, the plume rate and the grid, the
/// defaults below were tuned by hand so that the model shows isolated clouds
/// crossing both thresholds, rain that outlives its cloud and sharp wind
/// plumes. Treat them as configuration, not as calibrated values.
struct ModelParams {
  GridGeometry geometry{300, 500.0};
  double g = 10.0;
  double h0 = 90.0;     // resting fluid height
  double h_c = 90.02;   // cloud threshold
  double h_r = 90.4;    // rain threshold
  double phi_c = 899.77;
  double gamma_r = 3.0;  // rain enters the geopotential as gamma_r^2 * r
  double alpha_rain = 3e-4;  // 1/s
  double beta_rain = 10.0;
  double diff_h = 5000.0;  // m^2/s
  double diff_u = 5000.0;
  double diff_r = 200.0;
  double plume_rate = 8e-5;  // per meter per minute
  double plume_amplitude = 0.01;
  double plume_width = 2000.0;  // m, width of the convergence dipole
  double dt = 5.0;              // s

  /// Throws InvalidParameter when a field is out of range.
  void check() const;
};

struct ModelState {
  Eigen::VectorXd h;
  Eigen::VectorXd u;
  Eigen::VectorXd r;
  double t = 0.0;

  static ModelState rest(const ModelParams& params);
  Eigen::Index size() const { return h.size(); }
  /// Stacked row vector (h, u, r), matching StateLayout::stacked(geometry, 3).
  Eigen::RowVectorXd stacked() const;
  static ModelState from_stacked(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                 double t = 0.0);
};

/// Advances one dt with SSP-RK3, clips r at zero and adds the plumes that
/// arrive during the step. Throws StepSizeError when dt violates the
/// advective CFL bound and NumericalBlowup on non-finite values or h <= 0.
ModelState model_step(const ModelState& state, const ModelParams& params,
                      RandomStream& rng);

/// Runs `steps` model steps in place.
void integrate(ModelState& state, const ModelParams& params, long steps,
               RandomStream& rng);

/// Number of model steps in `seconds` (rounded to the nearest step).
long steps_for(const ModelParams& params, double seconds);

struct ObservationParams {
  double sigma_r = 0.1;
  double sigma_u = 0.0025;
  double r_c = 0.005;
};

struct RadarObs {
  Eigen::VectorXd y_r;            // every grid point, >= 0
  std::vector<Index> wind_points;  // points with y_r >= r_c, ascending
  Eigen::VectorXd y_u;            // wind at wind_points
  ObservationParams params;
};

/// Radar-like observations: rain through a square-root transform with
/// additive noise and truncation at zero, wind with Gaussian noise where the
/// observed rain reaches r_c.
RadarObs gen_observations(const ModelState& state,
                          const ObservationParams& params, RandomStream& rng);

/// Same with given rain noise eps (one per grid point, already scaled by
/// sigma_r) and wind noise (one per grid point, used only where wind is
/// observed).
RadarObs gen_observations(const ModelState& state,
                          const ObservationParams& params,
                          const Eigen::VectorXd& eps_r,
                          const Eigen::VectorXd& eps_u);

/// Rain rows at every grid point (variance r_var) followed by wind rows
/// (variance u_var), on the stacked (h, u, r) layout.
GaussObs obs_to_gauss(const RadarObs& radar, double r_var, double u_var);

/// Initial ensemble: one trajectory started at rest, burned in for one
/// separation and then sampled every `separation_days`.
Ensemble spinup_ensemble(const ModelParams& params, Eigen::Index k,
                         double separation_days, RandomStream& rng);

/// One state from a trajectory started at rest and run for `days`.
ModelState spinup_state(const ModelParams& params, double days,
                        RandomStream& rng);

void write_state_csv(std::ostream& out, const ModelState& state);
ModelState read_state_csv(std::istream& in);

}  // namespace lenkpf
