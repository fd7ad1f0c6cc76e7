#pragma once

#include <stdexcept>
#include <string>

namespace convopt {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (bad bounds, unordered pairs, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A coefficient is not finite or violates ellipticity.
class CoefficientError : public Error {
 public:
  using Error::Error;
};

/// A reaction weight or nonlinearity derivative went negative.
class MonotonicityError : public Error {
 public:
  using Error::Error;
};

/// Requested derivative order is not available for the chosen nonlinearity.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Sparse factorization failed or the linear residual is out of tolerance.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Newton and its truncated fallback both failed.
class StateSolveError : public Error {
 public:
  using Error::Error;
};

/// The truncated iteration converged with |y| reaching the truncation level.
class TruncationActiveError : public StateSolveError {
 public:
  using StateSolveError::StateSolveError;
};

/// Malformed configuration document; the message carries a JSON pointer.
class ParseError : public Error {
 public:
  ParseError(const std::string& pointer, const std::string& what)
      : Error(pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

/// Well-formed configuration that describes an invalid problem.
class SemanticError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace convopt
