/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "lenkpf/errors.hpp"

namespace lenkpf {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + text + "'", 0, key);
  }
  if (used != text.size() || !std::isfinite(value))
    throw ConfigError("expected a finite number, got '" + text + "'", 0, key);
  return value;
}

long to_long(const std::string& key, const std::string& text) {
  const double value = to_double(key, text);
  if (value != std::floor(value) || std::abs(value) > 9e15)
    throw ConfigError("expected an integer, got '" + text + "'", 0, key);
  return static_cast<long>(value);
}

std::uint64_t to_seed(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  std::uint64_t value = 0;
  try {
    if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
    value = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    throw ConfigError("expected a nonnegative integer, got '" + text + "'", 0, key);
  }
  if (used != text.size())
    throw ConfigError("expected a nonnegative integer, got '" + text + "'", 0, key);
  return value;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("expected a boolean, got '" + text + "'", 0, key);
}

EssBand to_band(const std::string& key, std::string text) {
  text.erase(std::remove_if(text.begin(), text.end(),
                            [](char c) { return c == '(' || c == ')'; }),
             text.end());
  const std::vector<std::string> parts = split_list(text);
  if (parts.size() != 2)
    throw ConfigError("expected two numbers 'lo, hi'", 0, key);
  return EssBand{to_double(key, parts[0]), to_double(key, parts[1])};
}

using Setter = std::function<void(ExperimentConfig&, const std::string&,
                                  const std::string&)>;

#define LENKPF_DOUBLE(path) \
  [](ExperimentConfig& c, const std::string& k, const std::string& v) { path = to_double(k, v); }

std::map<std::string, Setter> setters() {
  std::map<std::string, Setter> s;
  s["experiment.scenario"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
    c.scenario = v;
  };
  s["experiment.methods"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
    c.methods = split_list(v);
  };
  s["experiment.repetitions"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.repetitions = to_long(k, v);
  };
  s["experiment.base_seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.base_seed = to_seed(k, v);
  };
  s["experiment.interval"] = LENKPF_DOUBLE(c.interval_s);
  s["experiment.duration"] = LENKPF_DOUBLE(c.duration_s);
  s["experiment.spinup_separation_days"] = LENKPF_DOUBLE(c.spinup_separation_days);
  s["experiment.rank_space_thin"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.rank_space_thin = to_long(k, v);
  };
  s["experiment.rank_time_thin"] = LENKPF_DOUBLE(c.rank_time_thin_s);
  s["experiment.output"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
    c.output = v;
  };
  s["experiment.threads"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    const long t = to_long(k, v);
    if (t < 1) throw ConfigError("must be >= 1", 0, k);
    c.threads = static_cast<std::size_t>(t);
  };
  s["experiment.traces"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.traces = to_bool(k, v);
  };

  s["filters.k"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.k = to_long(k, v);
  };
  s["filters.localization"] = LENKPF_DOUBLE(c.localization);
  s["filters.block_segment"] = LENKPF_DOUBLE(c.block_segment);
  s["filters.ess_band"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.ess_band = to_band(k, v);
  };
  s["filters.r_var_rain"] = LENKPF_DOUBLE(c.r_var_rain);
  s["filters.r_var_wind"] = LENKPF_DOUBLE(c.r_var_wind);

  s["model.n_points"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    const long n = to_long(k, v);
    if (n < 2) throw ConfigError("must be >= 2", 0, k);
    c.model.geometry = GridGeometry(n, c.model.geometry.dx());
  };
  s["model.dx"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    const double dx = to_double(k, v);
    if (!(dx > 0.0)) throw ConfigError("must be > 0", 0, k);
    c.model.geometry = GridGeometry(c.model.geometry.n_points(), dx);
  };
  s["model.g"] = LENKPF_DOUBLE(c.model.g);
  s["model.h0"] = LENKPF_DOUBLE(c.model.h0);
  s["model.h_c"] = LENKPF_DOUBLE(c.model.h_c);
  s["model.h_r"] = LENKPF_DOUBLE(c.model.h_r);
  s["model.phi_c"] = LENKPF_DOUBLE(c.model.phi_c);
  s["model.gamma_r"] = LENKPF_DOUBLE(c.model.gamma_r);
  s["model.alpha_rain"] = LENKPF_DOUBLE(c.model.alpha_rain);
  s["model.beta_rain"] = LENKPF_DOUBLE(c.model.beta_rain);
  s["model.diff_h"] = LENKPF_DOUBLE(c.model.diff_h);
  s["model.diff_u"] = LENKPF_DOUBLE(c.model.diff_u);
  s["model.diff_r"] = LENKPF_DOUBLE(c.model.diff_r);
  s["model.plume_rate"] = LENKPF_DOUBLE(c.model.plume_rate);
  s["model.plume_amplitude"] = LENKPF_DOUBLE(c.model.plume_amplitude);
  s["model.plume_width"] = LENKPF_DOUBLE(c.model.plume_width);
  s["model.dt"] = LENKPF_DOUBLE(c.model.dt);

  s["observations.sigma_r"] = LENKPF_DOUBLE(c.observations.sigma_r);
  s["observations.sigma_u"] = LENKPF_DOUBLE(c.observations.sigma_u);
  s["observations.r_c"] = LENKPF_DOUBLE(c.observations.r_c);
  return s;
}

#undef LENKPF_DOUBLE

// Line of `key` inside `[section]`, for error messages only.
int line_of(const std::string& text, const std::string& section,
            const std::string& key) {
  std::istringstream in(text);
  std::string line, current;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.size() > 1 && t.front() == '[' && t.back() == ']') {
      current = trim(t.substr(1, t.size() - 2));
    } else if (current == section) {
      const auto eq = t.find('=');
      if (eq != std::string::npos && trim(t.substr(0, eq)) == key) return no;
    }
  }
  return 0;
}

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names{
      "enkf_global", "lenkf", "naive_lenkpf", "block_lenkpf",
      "pf_global",   "enkpf_global", "free"};
  return names;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

long ExperimentConfig::cycles() const {
  return std::lround(std::floor(duration_s / interval_s + 1e-9));
}

void apply_scenario(ExperimentConfig& cfg, const std::string& scenario) {
  if (scenario == "hf") {
    cfg.interval_s = 300.0;
    cfg.duration_s = 3600.0;
  } else if (scenario == "lf") {
    cfg.interval_s = 1800.0;
    cfg.duration_s = 3.0 * 86400.0;
  } else if (scenario != "custom") {
    throw ConfigError("unknown scenario '" + scenario + "'", 0, "experiment.scenario");
  }
  cfg.scenario = scenario;
}

void ExperimentConfig::validate() const {
  if (k < 2) throw ConfigError("ensemble size must be >= 2", 0, "filters.k");
  if (!(ess_band.lo > 0.0 && ess_band.lo < ess_band.hi && ess_band.hi <= 1.0))
    throw ConfigError("ess band must satisfy 0 < lo < hi <= 1", 0, "filters.ess_band");
  if (!(localization > 0.0))
    throw ConfigError("must be > 0", 0, "filters.localization");
  if (!(block_segment > 0.0))
    throw ConfigError("must be > 0", 0, "filters.block_segment");
  if (!(r_var_rain > 0.0)) throw ConfigError("must be > 0", 0, "filters.r_var_rain");
  if (!(r_var_wind > 0.0)) throw ConfigError("must be > 0", 0, "filters.r_var_wind");
  if (!(interval_s > 0.0)) throw ConfigError("must be > 0", 0, "experiment.interval");
  if (!(duration_s >= 0.0)) throw ConfigError("must be >= 0", 0, "experiment.duration");
  if (repetitions < 1) throw ConfigError("must be >= 1", 0, "experiment.repetitions");
  if (!(spinup_separation_days >= 0.0))
    throw ConfigError("must be >= 0", 0, "experiment.spinup_separation_days");
  if (rank_space_thin < 1) throw ConfigError("must be >= 1", 0, "experiment.rank_space_thin");
  if (!(rank_time_thin_s > 0.0))
    throw ConfigError("must be > 0", 0, "experiment.rank_time_thin");
  if (methods.empty()) throw ConfigError("no methods selected", 0, "experiment.methods");
  for (const auto& m : methods) {
    const auto& known = known_methods();
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw ConfigError("unknown method '" + m + "'", 0, "experiment.methods");
    if (std::count(methods.begin(), methods.end(), m) > 1)
      throw ConfigError("method '" + m + "' listed twice", 0, "experiment.methods");
  }
  if (!(observations.sigma_r > 0.0) || !(observations.sigma_u > 0.0))
    throw ConfigError("noise scales must be > 0", 0, "observations.sigma_r");
  if (!(observations.r_c >= 0.0)) throw ConfigError("must be >= 0", 0, "observations.r_c");
  try {
    model.check();
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what(), 0, "model");
  }
}

ExperimentConfig parse_config(const std::string& text,
                              std::optional<std::string> scenario_override) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("parse error: " + e.message(), static_cast<int>(e.line()));
  }

  ExperimentConfig cfg;
  std::string scenario = tree.get<std::string>("experiment.scenario", "hf");
  if (scenario_override) scenario = *scenario_override;
  apply_scenario(cfg, scenario);

  const auto table = setters();
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty())
      throw ConfigError("key outside of a section", line_of(text, "", section), section);
    for (const auto& [key, value] : entries) {
      const std::string full = section + "." + key;
      const int line = line_of(text, section, key);
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError("unknown key", line, full);
      if (full == "experiment.scenario") continue;
      try {
        it->second(cfg, full, trim(value.data()));
      } catch (const ConfigError& e) {
        throw ConfigError(e.message(), line, e.key());
      }
    }
  }
  if (scenario == "custom" && (!tree.get_optional<std::string>("experiment.interval") ||
                               !tree.get_optional<std::string>("experiment.duration")))
    throw ConfigError("custom scenario needs interval and duration", 0,
                      "experiment.interval");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path,
                             std::optional<std::string> scenario_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(scenario_override));
}

}  // namespace lenkpf
