#ifndef FAIRSAMPLE_ERROR_HPP
#define FAIRSAMPLE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fairsample {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sizes of two operands disagree (config length vs. model size, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration requested beyond the supported size.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on an argument does not hold.
class ContractError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Requested clause density exceeds the number of distinct clauses.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (DIMACS, JSON model, checkpoint, trace).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairsample

#endif  // FAIRSAMPLE_ERROR_HPP
