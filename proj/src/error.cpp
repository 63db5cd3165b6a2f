#include "gradflow/error.hpp"

namespace gradflow {

std::string_view to_string(ErrorKind kind)
{
  switch (kind) {
  case ErrorKind::InvalidArgument: return "InvalidArgument";
  case ErrorKind::DimensionMismatch: return "DimensionMismatch";
  case ErrorKind::InvalidProblem: return "InvalidProblem";
  case ErrorKind::SizeExceeded: return "SizeExceeded";
  case ErrorKind::Infeasible: return "Infeasible";
  case ErrorKind::VariantMismatch: return "VariantMismatch";
  case ErrorKind::LayoutMismatch: return "LayoutMismatch";
  case ErrorKind::BasisEvaluationError: return "BasisEvaluationError";
  case ErrorKind::DomainError: return "DomainError";
  case ErrorKind::NonFiniteState: return "NonFiniteState";
  case ErrorKind::WindowTooLarge: return "WindowTooLarge";
  case ErrorKind::DegenerateTimes: return "DegenerateTimes";
  case ErrorKind::ParseError: return "ParseError";
  case ErrorKind::SchemaError: return "SchemaError";
  case ErrorKind::DegenerateSplit: return "DegenerateSplit";
  case ErrorKind::DegenerateTruth: return "DegenerateTruth";
  case ErrorKind::AllFitsFailed: return "AllFitsFailed";
  case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace gradflow
