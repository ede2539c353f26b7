/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/random.hpp"

#include <cmath>
#include <numbers>

namespace lenkpf {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// Stafford's mix13 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int r) {
  return (x << r) | (x >> (64 - r));
}

}  // namespace

RandomStream::RandomStream(std::uint64_t key_lo, std::uint64_t key_hi)
    : key_lo_(mix64(key_lo ^ 0x243F6A8885A308D3ULL)),
      key_hi_(mix64(key_hi + kGolden)) {}

RandomStream::result_type RandomStream::operator()() {
  const std::uint64_t c = counter_++;
  std::uint64_t x = mix64(c * kGolden ^ key_lo_);
  x = mix64(x + rotl(key_hi_, 17) + c);
  return x ^ key_hi_;
}

double RandomStream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RandomStream::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  const double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t n = 0;
  // Cut off far in the tail; the remaining mass is below round-off.
  const std::uint64_t cap = static_cast<std::uint64_t>(mean + 40.0 * std::sqrt(mean) + 40.0);
  while (u >= cdf && n < cap) {
    ++n;
    p *= mean / static_cast<double>(n);
    cdf += p;
  }
  return n;
}

Eigen::MatrixXd RandomStream::normal_matrix(Eigen::Index rows,
                                            Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal();
  return out;
}

RandomStream RandomStream::split(std::uint64_t id) const {
  RandomStream child(0, 0);
  child.key_lo_ = mix64(key_lo_ ^ mix64(id + kGolden));
  child.key_hi_ = mix64(key_hi_ + rotl(id * kGolden, 23) + 1);
  return child;
}

RandomStream seed_stream(std::uint64_t base_seed, std::uint64_t repetition,
                         std::uint64_t cycle, StreamRole role,
                         std::uint64_t unit_id) {
  return RandomStream(base_seed)
      .split(repetition)
      .split(cycle)
      .split(static_cast<std::uint64_t>(role))
      .split(unit_id);
}

}  // namespace lenkpf
