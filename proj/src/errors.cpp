#include "spinsq/errors.hpp"

namespace spinsq {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::InvalidArgument: return "invalid_argument";
    case ErrorCategory::DimensionOverflow: return "dimension_overflow";
    case ErrorCategory::DimensionMismatch: return "dimension_mismatch";
    case ErrorCategory::PositivityViolation: return "positivity_violation";
    case ErrorCategory::GainSingularity: return "gain_singularity";
    case ErrorCategory::DegenerateDirection: return "degenerate_direction";
    case ErrorCategory::MinimumAtBoundary: return "minimum_at_boundary";
    case ErrorCategory::InsufficientPoints: return "insufficient_points";
    case ErrorCategory::EmptyCollection: return "empty_collection";
    case ErrorCategory::OutOfDomain: return "out_of_domain";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) {
  return 10 + static_cast<int>(category);
}

}  // namespace spinsq
