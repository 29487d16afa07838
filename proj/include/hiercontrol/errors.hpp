#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hiercontrol {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: grid sizes, regions, weights, scenario keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Ellipticity or symmetry violated by a coefficient field.
class CoefficientError : public Error {
 public:
  CoefficientError(const std::string& what, int node = -1) : Error(what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

/// Fields living on different grids, or wrong slice counts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Weight evaluated at a singular time.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// Sparse factorization or solve failed at a time slice.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, int slice) : Error(what), slice_(slice) {}
  int slice() const { return slice_; }

 private:
  int slice_;
};

class BlowUpError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Iteration budget exhausted; carries the residual history.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// CG stagnation on the regularized Gramian.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

/// Scenario file could not be parsed; line/column are 1-based, 0 if unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hiercontrol
