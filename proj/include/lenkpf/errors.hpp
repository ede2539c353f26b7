/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lenkpf {

// Every error raised by the library derives from Error so callers that only
// want to survive a failed analysis can catch a single type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InsufficientEnsemble : public Error {
 public:
  using Error::Error;
};

class DegenerateWeights : public Error {
 public:
  using Error::Error;
};

class InvalidBlock : public Error {
 public:
  using Error::Error;
};

class StepSizeError : public Error {
 public:
  using Error::Error;
};

class NumericalBlowup : public Error {
 public:
  NumericalBlowup(const std::string& what, std::size_t grid_point)
      : Error(what + " (grid point " + std::to_string(grid_point) + ")"),
        grid_point_(grid_point) {}
  std::size_t grid_point() const { return grid_point_; }

 private:
  std::size_t grid_point_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0, std::string key = {})
      : Error(format(what, line, key)),
        message_(what),
        line_(line),
        key_(std::move(key)) {}
  /// Message without the key and line suffixes.
  const std::string& message() const { return message_; }
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  static std::string format(const std::string& what, int line,
                            const std::string& key) {
    std::string out = what;
    if (!key.empty()) out += " [key " + key + "]";
    if (line > 0) out += " [line " + std::to_string(line) + "]";
    return out;
  }
  std::string message_;
  int line_;
  std::string key_;
};

}  // namespace lenkpf
