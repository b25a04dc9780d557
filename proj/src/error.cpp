#include "wfsim/error.hpp"

#include <algorithm>
#include <sstream>

namespace wfsim {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveMutation: return "NonPositiveMutation";
    case ErrorCode::AsymmetricCoupling: return "AsymmetricCoupling";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::SelfCoupling: return "SelfCoupling";
    case ErrorCode::CountSumMismatch: return "CountSumMismatch";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ModelTooLarge: return "ModelTooLarge";
    case ErrorCode::PopulationTooSmall: return "PopulationTooSmall";
    case ErrorCode::SingularAtBoundary: return "SingularAtBoundary";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnsupportedModelShape: return "UnsupportedModelShape";
    case ErrorCode::NonIntegrableEvaluation: return "NonIntegrableEvaluation";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {

std::string join_violations(const std::vector<Violation>& violations) {
  std::ostringstream out;
  for (std::size_t n = 0; n < violations.size(); ++n) {
    if (n > 0) out << "; ";
    out << to_string(violations[n].code) << " (" << violations[n].detail << ")";
  }
  return out.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(violations.empty() ? ErrorCode::InvalidArgument : violations.front().code,
            "model violates " + std::to_string(violations.size()) +
                " assumption(s): " + join_violations(violations)),
      violations_(std::move(violations)) {}

bool ValidationError::has(ErrorCode code) const noexcept {
  return std::any_of(violations_.begin(), violations_.end(),
                     [code](const Violation& v) { return v.code == code; });
}

}  // namespace wfsim
