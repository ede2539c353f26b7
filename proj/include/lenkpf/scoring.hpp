/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lenkpf/random.hpp"

namespace lenkpf {

/// CRPS of the empirical distribution of `values` against `truth`:
///   (1/k) sum |x_i - t| - (1/(2k^2)) sum_ij |x_i - x_j|.
/// Computed in O(k log k) from the sorted members.
double crps_empirical(const Eigen::Ref<const Eigen::VectorXd>& values,
                      double truth);

/// Mean CRPS over the columns of a k x n ensemble field.
double field_crps(const Eigen::Ref<const Eigen::MatrixXd>& ensemble,
                  const Eigen::Ref<const Eigen::VectorXd>& truth);

/// Rank histogram accumulator. Truth ranks among k members are counted in
/// bins 0..k, ties broken uniformly at random.
class RankHistogram {
 public:
  explicit RankHistogram(Eigen::Index k);

  Eigen::Index members() const { return static_cast<Eigen::Index>(counts_.size()) - 1; }
  const std::vector<long>& counts() const { return counts_; }
  long total() const;

  void add(const Eigen::Ref<const Eigen::VectorXd>& values, double truth,
           RandomStream& rng);
  /// Adds every `space_thin`-th grid point (starting at 0) of one field.
  void add_field(const Eigen::Ref<const Eigen::MatrixXd>& ensemble,
                 const Eigen::Ref<const Eigen::VectorXd>& truth,
                 Eigen::Index space_thin, RandomStream& rng);
  void merge(const RankHistogram& other);

 private:
  std::vector<long> counts_;
};

/// Rank of `truth` among `values` (0..k) with random tie-breaking.
Eigen::Index truth_rank(const Eigen::Ref<const Eigen::VectorXd>& values,
                        double truth, RandomStream& rng);

/// Thinning in time: true when `time_s` falls on a multiple of `every_s`.
bool on_time_grid(double time_s, double every_s);

struct ScoreRecord {
  long rep = 0;
  long cycle = 0;
  std::string method;
  std::string field;
  double crps = 0.0;
  double crps_free = 0.0;

  /// 100 crps / crps_free, empty when crps_free is not positive.
  std::optional<double> relative_pct() const;
};

/// Header line of the score file (no newline).
inline constexpr const char* kScoreHeader =
    "rep,cycle,method,field,crps,crps_free,relative_pct";

/// Quotes a CSV field when it contains a comma, quote or line break.
std::string csv_quote(const std::string& field);

/// Shortest round-trip decimal form of a double ("nan" for NaN).
std::string format_double(double value);

void write_score_row(std::ostream& out, const ScoreRecord& record);

}  // namespace lenkpf
