#pragma once

#include <stdexcept>
#include <string>

namespace tomolab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter is outside the domain of the operation (s < 1, t <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Two operands disagree on Hilbert-space dimension.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A matrix failed the density-matrix invariants (Hermitian, unit trace, PSD).
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// No (s, t) pair of the requested family reaches the target purity.
class UnachievablePurity : public DomainError {
 public:
  using DomainError::DomainError;
};

/// The rejection-sampling envelope was exceeded by the target density.
class EnvelopeViolation : public Error {
 public:
  using Error::Error;
};

/// A record's outcome probability fell to or below the probability floor.
class LikelihoodFloorBreach : public Error {
 public:
  LikelihoodFloorBreach(std::size_t record, double probability)
      : Error("outcome probability " + std::to_string(probability) + " at record " +
              std::to_string(record) + " is at or below the probability floor"),
        record_(record),
        probability_(probability) {}

  std::size_t record() const noexcept { return record_; }
  double probability() const noexcept { return probability_; }

 private:
  std::size_t record_;
  double probability_;
};

/// The trust radius underflowed without finding a likelihood increase.
class Stagnation : public Error {
 public:
  explicit Stagnation(double bound)
      : Error("trust-region step underflow; stopping bound " + std::to_string(bound)),
        bound_(bound) {}

  double bound() const noexcept { return bound_; }

 private:
  double bound_;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// One or more Monte Carlo trials failed to converge.
class ExperimentFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace tomolab
