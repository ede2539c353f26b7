/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lenkpf/config.hpp"
#include "lenkpf/scoring.hpp"

namespace lenkpf {

/// One method in one assimilation cycle.
struct CycleTrace {
  long cycle = 0;
  double time_s = 0.0;
  std::string method;
  std::string status;  // ok, failed or free
  long n_obs = 0;
  long n_wind = 0;
  double truth_rain_mean = 0.0;
  double forecast_rain_mean = 0.0;
  double analysis_rain_mean = 0.0;
  double forecast_rain_spread = 0.0;
  double analysis_rain_spread = 0.0;
  double gamma_min = 1.0;
  double gamma_mean = 1.0;
  double gamma_max = 1.0;
  double ess_min = 1.0;  // fraction of k
  double ess_mean = 1.0;
};

inline constexpr const char* kTraceHeader =
    "cycle,time_s,method,status,n_obs,n_wind,truth_rain_mean,"
    "forecast_rain_mean,analysis_rain_mean,forecast_rain_spread,"
    "analysis_rain_spread,gamma_min,gamma_mean,gamma_max,ess_min,ess_mean";

inline constexpr const char* kRankHeader = "method,field,rank,count";

using RankKey = std::pair<std::string, std::string>;  // method, field

struct RepetitionOutput {
  std::vector<ScoreRecord> scores;
  std::map<RankKey, RankHistogram> ranks;
  std::vector<CycleTrace> trace;
};

/// Runs one repetition of the twin experiment. `threads` bounds the member
/// forecast and block parallelism inside the repetition; results do not
/// depend on it.
RepetitionOutput run_repetition(const ExperimentConfig& cfg, long rep,
                                std::size_t threads = 1);

struct ExperimentOutput {
  std::vector<RepetitionOutput> repetitions;
  std::map<RankKey, RankHistogram> ranks;  // summed over repetitions
};

/// All repetitions, distributed over cfg.threads threads.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

/// Writes scores.csv, ranks.csv and (if cfg.traces) trace_<rep>.csv into
/// cfg.output, creating the directory.
void write_experiment(const ExperimentConfig& cfg, const ExperimentOutput& out);

void write_scores(std::ostream& out, const ExperimentOutput& result);
void write_ranks(std::ostream& out, const std::map<RankKey, RankHistogram>& ranks);
void write_trace(std::ostream& out, const std::vector<CycleTrace>& trace);

}  // namespace lenkpf
