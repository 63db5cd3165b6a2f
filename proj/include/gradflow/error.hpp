#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gradflow {

/// Failure categories shared by every module. The CLI reports these by name.
enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  InvalidProblem,
  SizeExceeded,
  Infeasible,
  VariantMismatch,
  LayoutMismatch,
  BasisEvaluationError,
  DomainError,
  NonFiniteState,
  WindowTooLarge,
  DegenerateTimes,
  ParseError,
  SchemaError,
  DegenerateSplit,
  DegenerateTruth,
  AllFitsFailed,
  IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace gradflow
