/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lenkpf/enkpf.hpp"
#include "lenkpf/sweq.hpp"

namespace lenkpf {

/// Names accepted in the method list, in output order.
const std::vector<std::string>& known_methods();

struct ExperimentConfig {
  std::string scenario = "hf";  // hf, lf or custom
  std::vector<std::string> methods = known_methods();
  Eigen::Index k = 50;
  double localization = 5000.0;  // taper half-length and window radius, m
  double block_segment = 10000.0;  // m
  EssBand ess_band{0.5, 0.8};
  double r_var_rain = 0.025 * 0.025;
  double r_var_wind = 0.0025 * 0.0025;
  double interval_s = 300.0;
  double duration_s = 3600.0;
  long repetitions = 1;
  std::uint64_t base_seed = 1;
  double spinup_separation_days = 0.125;
  Eigen::Index rank_space_thin = 10;
  double rank_time_thin_s = 1800.0;
  ModelParams model;
  ObservationParams observations;
  std::string output = "out";
  std::size_t threads = 1;
  bool traces = true;

  long cycles() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Parses INI text with sections [experiment], [filters], [model] and
/// [observations]. Missing keys take their defaults; interval and duration
/// default from the scenario (hf: 5 min for 1 h, lf: 30 min for 3 days) and
/// are required for `custom`. `scenario_override` replaces the scenario key.
ExperimentConfig parse_config(const std::string& text,
                              std::optional<std::string> scenario_override = {});

ExperimentConfig load_config(const std::string& path,
                             std::optional<std::string> scenario_override = {});

/// Applies the defaults of `scenario` to interval and duration.
void apply_scenario(ExperimentConfig& cfg, const std::string& scenario);

std::vector<std::string> split_list(const std::string& text);

}  // namespace lenkpf
