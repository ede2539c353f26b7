/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

// Command-line front end: cycled twin experiments, stand-alone spin-up and
// scoring of ensembles stored as state CSV files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lenkpf/config.hpp"
#include "lenkpf/errors.hpp"
#include "lenkpf/experiment.hpp"
#include "lenkpf/scoring.hpp"
#include "lenkpf/sweq.hpp"

namespace fs = std::filesystem;
using namespace lenkpf;

namespace {

int fail(const std::string& kind, const std::string& message, int code) {
  nlohmann::json line{{"status", "error"}, {"kind", kind}, {"message", message}};
  std::cerr << line.dump() << '\n';
  return code;
}

ModelState read_state(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open state file '" + path.string() + "'");
  return read_state_csv(in);
}

std::vector<fs::path> member_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".csv" &&
        entry.path().filename().string().rfind("member_", 0) == 0)
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized ensemble Kalman particle filters on a convective-scale toy model"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a cycled twin experiment");
  std::string config_path;
  std::optional<std::string> scenario;
  std::optional<long> reps;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> methods;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> threads;
  run->add_option("--config", config_path, "INI configuration file")->required();
  run->add_option("--scenario", scenario, "hf, lf or custom")
      ->check(CLI::IsMember({"hf", "lf", "custom"}));
  run->add_option("--reps", reps, "Number of repetitions");
  run->add_option("--seed", seed, "Base seed");
  run->add_option("--methods", methods, "Comma-separated method list");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* spin = app.add_subcommand("spinup", "Write a spun-up ensemble as state CSV files");
  std::string spin_config;
  long spin_k = 50;
  double spin_sep = -1.0;
  std::uint64_t spin_seed = 1;
  std::string spin_out = "spinup";
  spin->add_option("--config", spin_config, "INI configuration file (model section)");
  spin->add_option("--members", spin_k, "Ensemble size");
  spin->add_option("--separation", spin_sep, "Days between members");
  spin->add_option("--seed", spin_seed, "Seed");
  spin->add_option("--out", spin_out, "Output directory");

  auto* score = app.add_subcommand("score", "CRPS of an ensemble of state files against a truth");
  std::string score_dir, score_truth;
  score->add_option("--ensemble", score_dir, "Directory with member_*.csv files")->required();
  score->add_option("--truth", score_truth, "Truth state CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), 2);
  }

  try {
    if (*run) {
      ExperimentConfig cfg = load_config(config_path, scenario);
      if (reps) cfg.repetitions = *reps;
      if (seed) cfg.base_seed = *seed;
      if (methods) cfg.methods = split_list(*methods);
      if (out_dir) cfg.output = *out_dir;
      if (threads) cfg.threads = *threads;
      cfg.validate();
      const ExperimentOutput result = run_experiment(cfg);
      write_experiment(cfg, result);
      nlohmann::json done{{"status", "ok"},
                          {"output", cfg.output},
                          {"repetitions", cfg.repetitions},
                          {"cycles", cfg.cycles()}};
      std::cout << done.dump() << '\n';
    } else if (*spin) {
      ExperimentConfig cfg =
          spin_config.empty() ? ExperimentConfig{} : load_config(spin_config);
      const double sep = spin_sep >= 0.0 ? spin_sep : cfg.spinup_separation_days;
      RandomStream rng = seed_stream(spin_seed, 0, 0, StreamRole::kSpinup, 0);
      const Ensemble ens = spinup_ensemble(cfg.model, spin_k, sep, rng);
      fs::create_directories(spin_out);
      for (Eigen::Index i = 0; i < ens.size(); ++i) {
        std::ofstream f(fs::path(spin_out) / ("member_" + std::to_string(1000 + i).substr(1) + ".csv"));
        write_state_csv(f, ModelState::from_stacked(ens.members().row(i)));
      }
      std::cout << nlohmann::json{{"status", "ok"}, {"members", ens.size()}, {"output", spin_out}}.dump()
                << '\n';
    } else if (*score) {
      const ModelState truth = read_state(score_truth);
      const auto files = member_files(score_dir);
      if (files.empty()) throw ConfigError("no member_*.csv files in '" + score_dir + "'");
      Eigen::MatrixXd members(static_cast<Eigen::Index>(files.size()), 3 * truth.size());
      for (std::size_t i = 0; i < files.size(); ++i) {
        const ModelState s = read_state(files[i]);
        if (s.size() != truth.size()) throw ShapeError("member and truth grids differ");
        members.row(static_cast<Eigen::Index>(i)) = s.stacked();
      }
      const Eigen::Index n = truth.size();
      nlohmann::json res{{"status", "ok"}, {"members", files.size()}};
      res["crps"] = {{"h", field_crps(members.middleCols(0, n), truth.h)},
                     {"u", field_crps(members.middleCols(n, n), truth.u)},
                     {"r", field_crps(members.middleCols(2 * n, n), truth.r)}};
      std::cout << res.dump() << '\n';
    }
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 3);
  } catch (const Error& e) {
    return fail("runtime", e.what(), 4);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 5);
  }
  return 0;
}
