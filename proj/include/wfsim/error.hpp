#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wfsim {

enum class ErrorCode {
  NonPositiveMutation,
  AsymmetricCoupling,
  DimensionMismatch,
  DuplicateEdge,
  SelfCoupling,
  CountSumMismatch,
  InvalidState,
  IndexOutOfRange,
  ModelTooLarge,
  PopulationTooSmall,
  SingularAtBoundary,
  NonFiniteState,
  NoConvergence,
  UnsupportedModelShape,
  NonIntegrableEvaluation,
  EmptyInput,
  DomainError,
  InvalidArgument,
  ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Base exception for every model, numerical and I/O failure in the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Violation {
  ErrorCode code;
  std::string detail;
};

// Raised by validate_model; carries every violated assumption, not just the
// first one. code() reports the first violation.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }

  bool has(ErrorCode code) const noexcept;

 private:
  std::vector<Violation> violations_;
};

}  // namespace wfsim
