#pragma once

#include <stdexcept>
#include <string>

namespace evstudy {

// Every error raised by the library derives from Error. The CLI maps the
// concrete type to an exit code (see tools/evstudy_cli.cpp).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, spec, or command-line input.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Unknown control/covariate or inconsistent model specification.
class SpecError : public ConfigError {
public:
  using ConfigError::ConfigError;
};

// Input data failed validation (schema, ranges, codebook, non-finite values).
class DataError : public Error {
public:
  using Error::Error;
};

// Two opening events claim the same municipality inside the smallest radius.
class OverlapError : public DataError {
public:
  using DataError::DataError;
};

// Zero variance within a standardization cell.
class DegenerateScaleError : public DataError {
public:
  using DataError::DataError;
};

// A requested estimation sample is empty or unusable.
class SampleError : public DataError {
public:
  using DataError::DataError;
};

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string &what, double max_group_residual)
      : Error(what), max_group_residual_(max_group_residual) {}
  double max_group_residual() const noexcept { return max_group_residual_; }

private:
  double max_group_residual_;
};

// No identifiable coefficient survives (or no treatment coefficient does).
class DegenerateModelError : public Error {
public:
  using Error::Error;
};

// Covariance or test statistic cannot be formed (single cluster, singular
// sub-covariance).
class InferenceError : public Error {
public:
  using Error::Error;
};

} // namespace evstudy
