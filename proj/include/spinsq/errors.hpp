#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spinsq {

enum class ErrorCategory {
  InvalidArgument,
  DimensionOverflow,
  DimensionMismatch,
  PositivityViolation,
  GainSingularity,
  DegenerateDirection,
  MinimumAtBoundary,
  InsufficientPoints,
  EmptyCollection,
  OutOfDomain,
  Config,
  Io,
};

std::string_view category_name(ErrorCategory category);

// Process exit code used by the CLI for each category (0 is reserved for success).
int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace spinsq
