#pragma once

#include <stdexcept>
#include <string>

namespace epp {

/// Malformed or inconsistent input data (clinic files, posterior files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value, unknown key or violated parameter invariant.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure of a numerical or inferential step.
class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QuadratureError : public InferenceError {
 public:
  QuadratureError(const std::string& what, double achieved_error, double estimate)
      : InferenceError(what), achieved_error_(achieved_error), estimate_(estimate) {}

  double achieved_error() const noexcept { return achieved_error_; }
  double estimate() const noexcept { return estimate_; }

 private:
  double achieved_error_;
  double estimate_;
};

}  // namespace epp
