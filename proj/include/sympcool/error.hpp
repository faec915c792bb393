#pragma once

#include <stdexcept>
#include <string>

namespace sympcool {

/// Invalid argument or parameter outside a function's contract.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input lies outside the validity regime of an analytic model.
class OutOfRegime : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Numerical failure (step-size underflow, close-encounter guard, non-convergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration; `path` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace sympcool
