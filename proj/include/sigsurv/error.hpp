#pragma once

#include <stdexcept>
#include <string>

namespace sigsurv {

/// Malformed inputs, inconsistent shapes, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Overflow, divergence, non-finite objective values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataErrorKind {
  kMissingColumn,
  kNonMonotoneTimes,
  kIdMismatch,
  kNonFinite,
  kObservationAfterEvent,
  kParse,
  kIo,
};

class DataError : public ValidationError {
 public:
  DataError(DataErrorKind kind, const std::string& what)
      : ValidationError(what), kind_(kind) {}
  DataErrorKind kind() const noexcept { return kind_; }

 private:
  DataErrorKind kind_;
};

}  // namespace sigsurv
