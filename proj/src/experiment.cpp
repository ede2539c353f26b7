/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>

#include "lenkpf/block.hpp"
#include "lenkpf/errors.hpp"
#include "lenkpf/local.hpp"
#include "lenkpf/parallel.hpp"

namespace lenkpf {

namespace {

constexpr const char* kFields[] = {"h", "u", "r"};

std::uint64_t method_id(const std::string& name) {
  const auto& known = known_methods();
  return static_cast<std::uint64_t>(
      std::find(known.begin(), known.end(), name) - known.begin());
}

struct Analysis {
  Ensemble ensemble;
  std::vector<double> gammas;
  std::vector<double> ess;  // fraction of k
};

struct Context {
  const ExperimentConfig& cfg;
  StateLayout layout;
  TaperSpec taper;
  LocalWindowSpec window;
  std::size_t threads;
};

Analysis analyze(const std::string& method, const Ensemble& ens,
                 const GaussObs& obs, const Context& ctx, RandomStream rng) {
  const double k = static_cast<double>(ens.size());
  if (obs.empty()) return Analysis{ens.as(EnsembleKind::kAnalysis), {}, {}};
  if (method == "enkf_global") {
    const auto m = ensemble_moments(ens);
    return Analysis{enkf_update(ens, obs, m.cov, rng), {1.0}, {1.0}};
  }
  if (method == "enkpf_global") {
    const auto m = ensemble_moments(ens);
    AdaptiveResult r = adaptive_gamma(ens, obs, m.cov, ctx.cfg.ess_band, rng);
    return Analysis{std::move(r.result.analysis), {r.choice.gamma},
                    {r.choice.ess / k}};
  }
  if (method == "pf_global") {
    EnkpfResult r = pf_update(ens, obs, rng);
    return Analysis{std::move(r.analysis), {0.0}, {ess(r.weights) / k}};
  }
  if (method == "lenkf")
    return Analysis{lenkf_update(ens, obs, ctx.window, ctx.taper, ctx.layout, rng),
                    {1.0}, {1.0}};
  LocalResult r = [&] {
    if (method == "naive_lenkpf")
      return naive_lenkpf_update(ens, obs, ctx.window, ctx.taper, ctx.layout,
                                 ctx.cfg.ess_band, rng);
    if (method == "block_lenkpf")
      return block_lenkpf_update(ens, obs, ctx.taper, ctx.layout,
                                 ctx.cfg.block_segment, ctx.cfg.ess_band, rng,
                                 ctx.threads);
    throw InvalidParameter("unknown method '" + method + "'");
  }();
  return Analysis{std::move(r.analysis), std::move(r.diagnostics.gammas),
                  std::move(r.diagnostics.ess_fraction)};
}

// Advances every member by `steps` model steps. Member i always uses the
// same forcing stream, whichever method owns the ensemble.
Eigen::MatrixXd forecast(const Eigen::MatrixXd& members, const ExperimentConfig& cfg,
                         long rep, long cycle, long steps, std::size_t threads) {
  Eigen::MatrixXd out(members.rows(), members.cols());
  parallel_for(static_cast<std::size_t>(members.rows()), threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    RandomStream rng = seed_stream(cfg.base_seed, static_cast<std::uint64_t>(rep),
                                   static_cast<std::uint64_t>(cycle),
                                   StreamRole::kForecast, i);
    ModelState s = ModelState::from_stacked(members.row(row));
    integrate(s, cfg.model, steps, rng);
    out.row(row) = s.stacked();
  });
  return out;
}

double rain_mean(const Eigen::MatrixXd& members, Eigen::Index n) {
  return members.rightCols(n).mean();
}

double rain_spread(const Eigen::MatrixXd& members, Eigen::Index n) {
  const Eigen::MatrixXd r = members.rightCols(n);
  const Eigen::RowVectorXd mean = r.colwise().mean();
  const double var = (r.rowwise() - mean).squaredNorm() /
                     static_cast<double>((r.rows() - 1) * n);
  return std::sqrt(var);
}

void summarize(CycleTrace& t, const std::vector<double>& gammas,
               const std::vector<double>& ess) {
  if (!gammas.empty()) {
    t.gamma_min = *std::min_element(gammas.begin(), gammas.end());
    t.gamma_max = *std::max_element(gammas.begin(), gammas.end());
    double sum = 0.0;
    for (double g : gammas) sum += g;
    t.gamma_mean = sum / static_cast<double>(gammas.size());
  }
  if (!ess.empty()) {
    double lo = std::numeric_limits<double>::infinity(), sum = 0.0;
    long n = 0;
    for (double e : ess) {
      if (std::isnan(e)) continue;
      lo = std::min(lo, e);
      sum += e;
      ++n;
    }
    if (n > 0) {
      t.ess_min = lo;
      t.ess_mean = sum / static_cast<double>(n);
    }
  }
}

}  // namespace

RepetitionOutput run_repetition(const ExperimentConfig& cfg, long rep,
                                std::size_t threads) {
  cfg.validate();
  const GridGeometry geometry = cfg.model.geometry;
  const Eigen::Index n = geometry.n_points();
  const auto urep = static_cast<std::uint64_t>(rep);
  const Context ctx{cfg, StateLayout::stacked(geometry, 3),
                    TaperSpec(cfg.localization, geometry),
                    LocalWindowSpec(cfg.localization, geometry), threads};

  RandomStream truth_rng = seed_stream(cfg.base_seed, urep, 0, StreamRole::kTruthModel, 0);
  ModelState truth = spinup_state(cfg.model, 2.0 * cfg.spinup_separation_days, truth_rng);
  RandomStream spin_rng = seed_stream(cfg.base_seed, urep, 0, StreamRole::kSpinup, 0);
  const Ensemble initial =
      spinup_ensemble(cfg.model, cfg.k, cfg.spinup_separation_days, spin_rng);

  // The free run is always integrated because every score is relative to it.
  std::vector<std::string> methods = cfg.methods;
  const bool emit_free =
      std::find(methods.begin(), methods.end(), "free") != methods.end();
  if (!emit_free) methods.push_back("free");
  std::vector<Eigen::MatrixXd> state(methods.size(), initial.members());
  std::vector<bool> failed(methods.size(), false);
  const std::size_t free_slot =
      static_cast<std::size_t>(std::find(methods.begin(), methods.end(), "free") -
                               methods.begin());

  RepetitionOutput out;
  for (const auto& m : cfg.methods)
    for (const char* f : kFields) out.ranks.emplace(RankKey{m, f}, RankHistogram(cfg.k));

  const long steps = steps_for(cfg.model, cfg.interval_s);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (long cycle = 1; cycle <= cfg.cycles(); ++cycle) {
    const auto ucycle = static_cast<std::uint64_t>(cycle);
    const double time = static_cast<double>(cycle) * cfg.interval_s;
    RandomStream model_rng = seed_stream(cfg.base_seed, urep, ucycle, StreamRole::kTruthModel, 0);
    integrate(truth, cfg.model, steps, model_rng);
    truth.t = time;
    RandomStream obs_rng = seed_stream(cfg.base_seed, urep, ucycle, StreamRole::kObservation, 0);
    const RadarObs radar = gen_observations(truth, cfg.observations, obs_rng);
    const GaussObs obs = obs_to_gauss(radar, cfg.r_var_rain, cfg.r_var_wind);

    for (std::size_t s = 0; s < methods.size(); ++s) {
      if (failed[s]) continue;
      try {
        state[s] = forecast(state[s], cfg, rep, cycle, steps, threads);
      } catch (const Error&) {
        if (s == free_slot) throw;
        failed[s] = true;
      }
    }

    const Eigen::VectorXd truth_fields[] = {truth.h, truth.u, truth.r};
    double crps_free[3];
    for (int f = 0; f < 3; ++f)
      crps_free[f] = field_crps(state[free_slot].middleCols(f * n, n), truth_fields[f]);

    const bool rank_time = on_time_grid(time, cfg.rank_time_thin_s);
    for (std::size_t s = 0; s < cfg.methods.size(); ++s) {
      const std::string& m = methods[s];
      for (int f = 0; f < 3; ++f) {
        ScoreRecord rec{rep, cycle, m, kFields[f], nan, crps_free[f]};
        if (!failed[s]) {
          const auto field = state[s].middleCols(f * n, n);
          rec.crps = field_crps(field, truth_fields[f]);
          if (rank_time) {
            RandomStream tie_rng = seed_stream(cfg.base_seed, urep, ucycle,
                                               StreamRole::kRankTies,
                                               method_id(m) * 3 + static_cast<std::uint64_t>(f));
            out.ranks.at(RankKey{m, kFields[f]})
                .add_field(field, truth_fields[f], cfg.rank_space_thin, tie_rng);
          }
        }
        out.scores.push_back(rec);
      }
    }

    for (std::size_t s = 0; s < cfg.methods.size(); ++s) {
      const std::string& m = methods[s];
      CycleTrace t;
      t.cycle = cycle;
      t.time_s = time;
      t.method = m;
      t.n_obs = static_cast<long>(obs.size());
      t.n_wind = static_cast<long>(radar.wind_points.size());
      t.truth_rain_mean = truth.r.mean();
      if (failed[s]) {
        t.status = "failed";
        t.forecast_rain_mean = t.analysis_rain_mean = nan;
        t.forecast_rain_spread = t.analysis_rain_spread = nan;
        t.gamma_min = t.gamma_mean = t.gamma_max = t.ess_min = t.ess_mean = nan;
        out.trace.push_back(t);
        continue;
      }
      t.forecast_rain_mean = rain_mean(state[s], n);
      t.forecast_rain_spread = rain_spread(state[s], n);
      if (m == "free") {
        t.status = "free";
      } else {
        try {
          RandomStream rng = seed_stream(cfg.base_seed, urep, ucycle,
                                         StreamRole::kAnalysis, method_id(m));
          Analysis a = analyze(m, Ensemble(state[s]), obs, ctx, rng);
          state[s] = a.ensemble.members();
          summarize(t, a.gammas, a.ess);
          t.status = "ok";
        } catch (const Error&) {
          failed[s] = true;
          t.status = "failed";
        }
      }
      t.analysis_rain_mean = failed[s] ? nan : rain_mean(state[s], n);
      t.analysis_rain_spread = failed[s] ? nan : rain_spread(state[s], n);
      out.trace.push_back(t);
    }
  }
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto reps = static_cast<std::size_t>(cfg.repetitions);
  ExperimentOutput out;
  out.repetitions.resize(reps);
  const std::size_t outer = std::min(cfg.threads, reps);
  const std::size_t inner = std::max<std::size_t>(1, cfg.threads / outer);
  parallel_for(reps, outer, [&](std::size_t r) {
    out.repetitions[r] = run_repetition(cfg, static_cast<long>(r), inner);
  });
  for (const auto& m : cfg.methods)
    for (const char* f : kFields) out.ranks.emplace(RankKey{m, f}, RankHistogram(cfg.k));
  for (const auto& rep : out.repetitions)
    for (const auto& [key, hist] : rep.ranks) out.ranks.at(key).merge(hist);
  return out;
}

void write_scores(std::ostream& out, const ExperimentOutput& result) {
  out << kScoreHeader << '\n';
  for (const auto& rep : result.repetitions)
    for (const auto& rec : rep.scores) write_score_row(out, rec);
}

void write_ranks(std::ostream& out, const std::map<RankKey, RankHistogram>& ranks) {
  out << kRankHeader << '\n';
  for (const auto& [key, hist] : ranks)
    for (std::size_t j = 0; j < hist.counts().size(); ++j)
      out << csv_quote(key.first) << ',' << key.second << ',' << j << ','
          << hist.counts()[j] << '\n';
}

void write_trace(std::ostream& out, const std::vector<CycleTrace>& trace) {
  out << kTraceHeader << '\n';
  for (const auto& t : trace) {
    out << t.cycle << ',' << format_double(t.time_s) << ',' << csv_quote(t.method)
        << ',' << t.status << ',' << t.n_obs << ',' << t.n_wind;
    for (double v : {t.truth_rain_mean, t.forecast_rain_mean, t.analysis_rain_mean,
                     t.forecast_rain_spread, t.analysis_rain_spread, t.gamma_min,
                     t.gamma_mean, t.gamma_max, t.ess_min, t.ess_mean})
      out << ',' << format_double(v);
    out << '\n';
  }
}

void write_experiment(const ExperimentConfig& cfg, const ExperimentOutput& out) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.output + "'");
  const auto open = [&](const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + (dir / name).string() + "'");
    return f;
  };
  {
    auto f = open("scores.csv");
    write_scores(f, out);
  }
  {
    auto f = open("ranks.csv");
    write_ranks(f, out.ranks);
  }
  if (cfg.traces)
    for (std::size_t r = 0; r < out.repetitions.size(); ++r) {
      auto f = open("trace_" + std::to_string(r) + ".csv");
      write_trace(f, out.repetitions[r].trace);
    }
}

}  // namespace lenkpf
