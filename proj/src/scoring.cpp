/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

#include "lenkpf/errors.hpp"

namespace lenkpf {

double crps_empirical(const Eigen::Ref<const Eigen::VectorXd>& values,
                      double truth) {
  const Eigen::Index k = values.size();
  if (k < 1) throw InvalidParameter("CRPS needs at least one member");
  if (!std::isfinite(truth) || !values.allFinite())
    throw InvalidParameter("CRPS inputs must be finite");
  std::vector<double> x(values.data(), values.data() + k);
  std::sort(x.begin(), x.end());
  double abs_err = 0.0;
  // sum_{i<j} (x_j - x_i) for sorted x equals sum_i (2i - k + 1) x_i; taken
  // relative to x_0 so that equal members cancel exactly.
  double spread = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    abs_err += std::abs(xi - truth);
    spread += static_cast<double>(2 * i - k + 1) * (xi - x.front());
  }
  const double kd = static_cast<double>(k);
  const double value = abs_err / kd - spread / (kd * kd);
  return value > 0.0 ? value : 0.0;
}

double field_crps(const Eigen::Ref<const Eigen::MatrixXd>& ensemble,
                  const Eigen::Ref<const Eigen::VectorXd>& truth) {
  if (ensemble.cols() != truth.size() || truth.size() == 0)
    throw ShapeError("ensemble field and truth have different lengths");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < truth.size(); ++j)
    sum += crps_empirical(ensemble.col(j), truth(j));
  return sum / static_cast<double>(truth.size());
}

Eigen::Index truth_rank(const Eigen::Ref<const Eigen::VectorXd>& values,
                        double truth, RandomStream& rng) {
  Eigen::Index below = 0;
  Eigen::Index ties = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < truth) ++below;
    else if (values(i) == truth) ++ties;
  }
  if (ties == 0) return below;
  const auto extra = static_cast<Eigen::Index>(
      std::floor(rng.uniform() * static_cast<double>(ties + 1)));
  return below + std::min(extra, ties);
}

RankHistogram::RankHistogram(Eigen::Index k) {
  if (k < 1) throw InvalidParameter("rank histogram needs k >= 1");
  counts_.assign(static_cast<std::size_t>(k + 1), 0);
}

long RankHistogram::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), 0L);
}

void RankHistogram::add(const Eigen::Ref<const Eigen::VectorXd>& values,
                        double truth, RandomStream& rng) {
  if (values.size() != members())
    throw ShapeError("rank histogram member count mismatch");
  ++counts_[static_cast<std::size_t>(truth_rank(values, truth, rng))];
}

void RankHistogram::add_field(const Eigen::Ref<const Eigen::MatrixXd>& ensemble,
                              const Eigen::Ref<const Eigen::VectorXd>& truth,
                              Eigen::Index space_thin, RandomStream& rng) {
  if (space_thin < 1) throw InvalidParameter("space thinning must be >= 1");
  if (ensemble.cols() != truth.size())
    throw ShapeError("ensemble field and truth have different lengths");
  for (Eigen::Index j = 0; j < truth.size(); j += space_thin)
    add(ensemble.col(j), truth(j), rng);
}

void RankHistogram::merge(const RankHistogram& other) {
  if (other.counts_.size() != counts_.size())
    throw ShapeError("rank histograms have different member counts");
  for (std::size_t j = 0; j < counts_.size(); ++j) counts_[j] += other.counts_[j];
}

bool on_time_grid(double time_s, double every_s) {
  if (!(every_s > 0.0)) throw InvalidParameter("time thinning must be > 0");
  const double q = time_s / every_s;
  return std::abs(q - std::round(q)) < 1e-9 * std::max(1.0, std::abs(q));
}

std::optional<double> ScoreRecord::relative_pct() const {
  if (!(crps_free > 0.0)) return std::nullopt;
  return 100.0 * crps / crps_free;
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_score_row(std::ostream& out, const ScoreRecord& r) {
  out << r.rep << ',' << r.cycle << ',' << csv_quote(r.method) << ','
      << csv_quote(r.field) << ',' << format_double(r.crps) << ','
      << format_double(r.crps_free) << ',';
  if (const auto pct = r.relative_pct(); pct && !std::isnan(*pct))
    out << format_double(*pct);
  out << '\n';
}

}  // namespace lenkpf
