#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace mjls {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (mode count, block size, square-ness).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant of a domain type.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Invalid solver or line-search parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative kernel (QR sweeps, power iteration, ...) failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A Krylov recurrence broke down (rho or omega vanished).
class BreakdownError : public Error {
 public:
  using Error::Error;
};

/// Line search could not produce an admissible step.
class LineSearchError : public Error {
 public:
  using Error::Error;
};

/// Dense oracle refused: the assembled system would exceed the size guard.
class SizeGuardError : public Error {
 public:
  using Error::Error;
};

/// A linear system (dense or Lyapunov) is numerically singular.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// Lyapunov operator L_A is singular because lambda_i + lambda_j ~ 0.
class SingularLyapunovError : public SingularError {
 public:
  SingularLyapunovError(std::complex<double> lambda_i, std::complex<double> lambda_j, std::string what)
      : SingularError(std::move(what)), lambda_i_(lambda_i), lambda_j_(lambda_j) {}

  std::complex<double> lambda_i() const noexcept { return lambda_i_; }
  std::complex<double> lambda_j() const noexcept { return lambda_j_; }

 private:
  std::complex<double> lambda_i_;
  std::complex<double> lambda_j_;
};

/// The problem is not mean-square stable where stability is required.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// Problem/system file could not be parsed. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mjls
