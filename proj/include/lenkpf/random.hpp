/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <limits>

#include <Eigen/Core>

namespace lenkpf {

/// Counter-based keyed random stream.
///
/// Draw n of a stream is a pure function of (key, n), so a stream can be
/// re-created anywhere from its key and sub-streams derived with split() do
/// not depend on how much the parent has been consumed. This is what lets
/// parallel and serial runs produce identical numbers.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key_lo, std::uint64_t key_hi = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller, one output per pair of uniforms).
  double normal();
  /// Poisson variate by sequential inversion; intended for small means.
  std::uint64_t poisson(double mean);

  /// k x m matrix of independent standard normals, filled row by row.
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  /// Child stream keyed by (this key, id). Does not consume draws.
  RandomStream split(std::uint64_t id) const;

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_lo_;
  std::uint64_t key_hi_;
  std::uint64_t counter_ = 0;
};

/// Roles of the independent streams used by a cycled experiment.
enum class StreamRole : std::uint64_t {
  kSpinup = 1,
  kTruthModel = 2,
  kObservation = 3,
  kForecast = 4,
  kAnalysis = 5,
  kRankTies = 6,
};

/// Sub-stream for one (repetition, cycle, role, unit) tuple of an experiment.
RandomStream seed_stream(std::uint64_t base_seed, std::uint64_t repetition,
                         std::uint64_t cycle, StreamRole role,
                         std::uint64_t unit_id);

}  // namespace lenkpf
