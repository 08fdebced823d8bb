#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dynamo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, shapes or configuration values.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Non-positive density (or pressure where a sound speed is needed).
class InadmissibleState : public Error {
 public:
  using Error::Error;
};

/// Raised when the discrete solution becomes inadmissible or the
/// time integrator cannot make progress.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double time, std::ptrdiff_t element)
      : Error(what + " (t=" + std::to_string(time) +
              ", element=" + std::to_string(element) + ")"),
        time_(time),
        element_(element) {}

  double time() const noexcept { return time_; }
  std::ptrdiff_t element() const noexcept { return element_; }

 private:
  double time_;
  std::ptrdiff_t element_;
};

/// Thresholds cannot be formed from an all-zero error field.
class DegenerateThreshold : public Error {
 public:
  using Error::Error;
};

/// File format and filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dynamo
