#pragma once

#include <stdexcept>
#include <string>

namespace plateid {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Bad or out-of-range configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Any failure of a numerical procedure: inverted elements, singular
/// systems, Newton divergence, non-SPD covariances.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// det(F) <= 0 at an evaluation point.
class NonPhysicalDeformation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ElementInversion : public NumericalError {
 public:
  ElementInversion(std::size_t element, double det)
      : NumericalError("element " + std::to_string(element) +
                       " inverted (det F = " + std::to_string(det) + ")"),
        element_(element) {}
  std::size_t element() const { return element_; }

 private:
  std::size_t element_;
};

class SingularSystem : public NumericalError {
 public:
  SingularSystem(const std::string& what, long rank, long columns)
      : NumericalError(what + " (rank " + std::to_string(rank) + " of " +
                       std::to_string(columns) + " columns)"),
        rank_(rank),
        columns_(columns) {}
  long rank() const { return rank_; }
  long columns() const { return columns_; }

 private:
  long rank_;
  long columns_;
};

class NonConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InterpolationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SegmentationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace plateid
