/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/sweq.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "lenkpf/errors.hpp"

namespace lenkpf {

namespace {

constexpr double kSecondsPerDay = 86400.0;
const double kSqrtE = std::exp(0.5);

// Right-hand side of the three equations with centered differences, written
// into t_h, t_u, t_r. `pot` is scratch space of length n.
void tendency(const double* h, const double* u, const double* r, double* t_h,
              double* t_u, double* t_r, double* pot, Index n,
              const ModelParams& p) {
  const double inv2dx = 1.0 / (2.0 * p.geometry.dx());
  const double invdx2 = 1.0 / (p.geometry.dx() * p.geometry.dx());
  const double gr2 = p.gamma_r * p.gamma_r;

  for (Index i = 0; i < n; ++i)
    pot[i] = (h[i] > p.h_c ? p.phi_c : p.g * h[i]) + gr2 * r[i];

  auto point = [&](Index i, Index l, Index rr) {
    const double du = (u[rr] - u[l]) * inv2dx;
    t_u[i] = -u[i] * du - (pot[rr] - pot[l]) * inv2dx +
             p.diff_u * (u[rr] - 2.0 * u[i] + u[l]) * invdx2;
    t_h[i] = -(u[rr] * h[rr] - u[l] * h[l]) * inv2dx +
             p.diff_h * (h[rr] - 2.0 * h[i] + h[l]) * invdx2;
    const double dr = -u[i] * (r[rr] - r[l]) * inv2dx +
                p.diff_r * (r[rr] - 2.0 * r[i] + r[l]) * invdx2 -
                p.alpha_rain * r[i];
    t_r[i] = dr - (h[i] > p.h_r && du < 0.0 ? p.beta_rain * du : 0.0);
  };
  point(0, n - 1, 1);
  for (Index i = 1; i < n - 1; ++i) point(i, i - 1, i + 1);
  point(n - 1, n - 2, 0);
}

void check_finite(const ModelState& s) {
  for (Index i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s.h(i)) || !std::isfinite(s.u(i)) ||
        !std::isfinite(s.r(i)))
      throw NumericalBlowup("non-finite model state",
                            static_cast<std::size_t>(i));
    if (!(s.h(i) > 0.0))
      throw NumericalBlowup("non-positive fluid height",
                            static_cast<std::size_t>(i));
  }
}

void check_cfl(const ModelState& s, const ModelParams& p) {
  double speed = 0.0;
  for (Index i = 0; i < s.size(); ++i)
    speed = std::max(speed, std::abs(s.u(i)) + std::sqrt(p.g * s.h(i)));
  if (p.dt * speed > p.geometry.dx())
    throw StepSizeError("time step " + std::to_string(p.dt) +
                        " s violates the CFL bound dx / " + std::to_string(speed));
}

void add_plumes(ModelState& s, const ModelParams& p, RandomStream& rng) {
  if (p.plume_rate == 0.0 || p.plume_amplitude == 0.0) return;
  const double mean = p.plume_rate * p.geometry.length() * p.dt / 60.0;
  const std::uint64_t count = rng.poisson(mean);
  const double length = p.geometry.length();
  const double cutoff = 5.0 * p.plume_width;
  for (std::uint64_t j = 0; j < count; ++j) {
    const double center = rng.uniform() * length;
    const Index n = s.size();
    Index first = 0, last = n - 1;
    if (2.0 * cutoff + 2.0 * p.geometry.dx() < length) {
      first = static_cast<Index>(std::floor((center - cutoff) / p.geometry.dx())) - 1;
      last = static_cast<Index>(std::ceil((center + cutoff) / p.geometry.dx())) + 1;
    }
    for (Index j = first; j <= last; ++j) {
      const Index i = p.geometry.wrap(j);
      // Signed circular offset from the plume center.
      double d = static_cast<double>(i) * p.geometry.dx() - center;
      d -= length * std::round(d / length);
      if (std::abs(d) > cutoff) continue;
      const double z = d / p.plume_width;
      // Derivative-of-Gaussian profile scaled to peak |u| = amplitude: inflow
      // from both sides, no net momentum.
      s.u(i) -= p.plume_amplitude * kSqrtE * z * std::exp(-0.5 * z * z);
    }
  }
}

double parse_double(const std::string& field, int line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("malformed number '" + field + "' in state file", line);
  return value;
}

}  // namespace

void ModelParams::check() const {
  if (!(h_c > 0.0) || !(h_r > h_c))
    throw InvalidParameter("model thresholds must satisfy h_r > h_c > 0");
  if (!(h0 > 0.0) || !(g > 0.0)) throw InvalidParameter("h0 and g must be > 0");
  for (double rate : {alpha_rain, beta_rain, diff_h, diff_u, diff_r, plume_rate,
                      plume_amplitude, gamma_r})
    if (!(rate >= 0.0) || !std::isfinite(rate))
      throw InvalidParameter("model rates must be finite and >= 0");
  if (!(plume_width > 0.0)) throw InvalidParameter("plume width must be > 0");
  if (!(dt > 0.0)) throw InvalidParameter("model time step must be > 0");
}

ModelState ModelState::rest(const ModelParams& params) {
  const Index n = params.geometry.n_points();
  return ModelState{Eigen::VectorXd::Constant(n, params.h0),
                    Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0.0};
}

Eigen::RowVectorXd ModelState::stacked() const {
  Eigen::RowVectorXd x(3 * size());
  x << h.transpose(), u.transpose(), r.transpose();
  return x;
}

ModelState ModelState::from_stacked(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                    double t) {
  if (x.size() % 3 != 0) throw ShapeError("stacked state length not divisible by 3");
  const Index n = x.size() / 3;
  return ModelState{x.segment(0, n).transpose(), x.segment(n, n).transpose(),
                    x.segment(2 * n, n).transpose(), t};
}

ModelState model_step(const ModelState& s, const ModelParams& p,
                      RandomStream& rng) {
  if (s.size() != p.geometry.n_points())
    throw ShapeError("model state does not match the grid");
  check_finite(s);
  check_cfl(s, p);
  const double dt = p.dt;
  const Index n = s.size();

  // Workspace: three stage states and one tendency, plus potential scratch.
  Eigen::MatrixXd work(n, 7);
  double* th = work.col(0).data();
  double* tu = work.col(1).data();
  double* tr = work.col(2).data();
  double* pot = work.col(3).data();
  double* h1 = work.col(4).data();
  double* u1 = work.col(5).data();
  double* r1 = work.col(6).data();
  const double* h0 = s.h.data();
  const double* u0 = s.u.data();
  const double* r0 = s.r.data();

  tendency(h0, u0, r0, th, tu, tr, pot, n, p);
  for (Index i = 0; i < n; ++i) {
    h1[i] = h0[i] + dt * th[i];
    u1[i] = u0[i] + dt * tu[i];
    r1[i] = r0[i] + dt * tr[i];
  }

  tendency(h1, u1, r1, th, tu, tr, pot, n, p);
  for (Index i = 0; i < n; ++i) {
    h1[i] = 0.75 * h0[i] + 0.25 * (h1[i] + dt * th[i]);
    u1[i] = 0.75 * u0[i] + 0.25 * (u1[i] + dt * tu[i]);
    r1[i] = 0.75 * r0[i] + 0.25 * (r1[i] + dt * tr[i]);
  }

  tendency(h1, u1, r1, th, tu, tr, pot, n, p);
  ModelState out{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n),
                 s.t + dt};
  for (Index i = 0; i < n; ++i) {
    out.h(i) = h0[i] / 3.0 + (2.0 / 3.0) * (h1[i] + dt * th[i]);
    out.u(i) = u0[i] / 3.0 + (2.0 / 3.0) * (u1[i] + dt * tu[i]);
    out.r(i) = std::max(r0[i] / 3.0 + (2.0 / 3.0) * (r1[i] + dt * tr[i]), 0.0);
  }

  add_plumes(out, p, rng);
  check_finite(out);
  return out;
}

void integrate(ModelState& state, const ModelParams& params, long steps,
               RandomStream& rng) {
  for (long i = 0; i < steps; ++i) state = model_step(state, params, rng);
}

long steps_for(const ModelParams& params, double seconds) {
  if (!(seconds >= 0.0)) throw InvalidParameter("duration must be >= 0");
  return std::lround(seconds / params.dt);
}

RadarObs gen_observations(const ModelState& state,
                          const ObservationParams& params,
                          const Eigen::VectorXd& eps_r,
                          const Eigen::VectorXd& eps_u) {
  const Index n = state.size();
  if (eps_r.size() != n || eps_u.size() != n)
    throw ShapeError("observation noise does not match the grid");
  RadarObs out;
  out.params = params;
  out.y_r = Eigen::VectorXd::Zero(n);
  std::vector<double> wind;
  for (Index i = 0; i < n; ++i) {
    const double excess = state.r(i) - params.r_c;
    if (excess > 0.0) {
      const double root = std::sqrt(excess);
      const double half = 0.5 * eps_r(i);
      if (half > -root) out.y_r(i) = (root + half) * (root + half);
    }
    if (out.y_r(i) >= params.r_c) {
      out.wind_points.push_back(i);
      wind.push_back(state.u(i) + eps_u(i));
    }
  }
  out.y_u = Eigen::Map<const Eigen::VectorXd>(wind.data(),
                                              static_cast<Index>(wind.size()));
  return out;
}

RadarObs gen_observations(const ModelState& state,
                          const ObservationParams& params, RandomStream& rng) {
  const Index n = state.size();
  Eigen::VectorXd eps_r(n), eps_u(n);
  for (Index i = 0; i < n; ++i) eps_r(i) = params.sigma_r * rng.normal();
  for (Index i = 0; i < n; ++i) eps_u(i) = params.sigma_u * rng.normal();
  return gen_observations(state, params, eps_r, eps_u);
}

GaussObs obs_to_gauss(const RadarObs& radar, double r_var, double u_var) {
  const Index n = radar.y_r.size();
  const Index m_u = static_cast<Index>(radar.wind_points.size());
  Eigen::VectorXd y(n + m_u), var(n + m_u);
  std::vector<Index> columns;
  columns.reserve(static_cast<std::size_t>(n + m_u));
  for (Index i = 0; i < n; ++i) {
    y(i) = radar.y_r(i);
    var(i) = r_var;
    columns.push_back(2 * n + i);
  }
  for (Index j = 0; j < m_u; ++j) {
    y(n + j) = radar.y_u(j);
    var(n + j) = u_var;
    columns.push_back(n + radar.wind_points[static_cast<std::size_t>(j)]);
  }
  return GaussObs(std::move(y), std::move(columns), std::move(var));
}

ModelState spinup_state(const ModelParams& params, double days,
                        RandomStream& rng) {
  params.check();
  ModelState s = ModelState::rest(params);
  integrate(s, params, steps_for(params, days * kSecondsPerDay), rng);
  return s;
}

Ensemble spinup_ensemble(const ModelParams& params, Eigen::Index k,
                         double separation_days, RandomStream& rng) {
  if (k < 2) throw InsufficientEnsemble("spin-up needs k >= 2");
  if (!(separation_days >= 0.0))
    throw InvalidParameter("spin-up separation must be >= 0");
  params.check();
  const long steps = steps_for(params, separation_days * kSecondsPerDay);
  ModelState s = ModelState::rest(params);
  integrate(s, params, steps, rng);
  Eigen::MatrixXd members(k, 3 * params.geometry.n_points());
  for (Index i = 0; i < k; ++i) {
    if (i > 0) integrate(s, params, steps, rng);
    members.row(i) = s.stacked();
  }
  return Ensemble(std::move(members), EnsembleKind::kBackground);
}

void write_state_csv(std::ostream& out, const ModelState& state) {
  out << "grid_index,h,u,r\n";
  out.precision(17);
  for (Index i = 0; i < state.size(); ++i)
    out << i << ',' << state.h(i) << ',' << state.u(i) << ',' << state.r(i)
        << '\n';
}

ModelState read_state_csv(std::istream& in) {
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != "grid_index,h,u,r")
    throw ConfigError("state file must start with grid_index,h,u,r", 1);
  std::vector<double> h, u, r;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 4)
      throw ConfigError("state row needs 4 fields", line_no);
    if (parse_double(fields[0], line_no) != static_cast<double>(h.size()))
      throw ConfigError("grid_index out of sequence", line_no);
    h.push_back(parse_double(fields[1], line_no));
    u.push_back(parse_double(fields[2], line_no));
    r.push_back(parse_double(fields[3], line_no));
  }
  const auto n = static_cast<Index>(h.size());
  return ModelState{Eigen::Map<Eigen::VectorXd>(h.data(), n),
                    Eigen::Map<Eigen::VectorXd>(u.data(), n),
                    Eigen::Map<Eigen::VectorXd>(r.data(), n), 0.0};
}

}  // namespace lenkpf
