#include "arched/error.hpp"

#include <array>

namespace arched {

namespace {

constexpr std::array k_codes = {
    ErrorCode::bad_request,          ErrorCode::invalid_input,
    ErrorCode::invalid_transition,   ErrorCode::not_found,
    ErrorCode::conflict,             ErrorCode::precondition,
    ErrorCode::unknown_objective,    ErrorCode::import_malformed,
    ErrorCode::generation_empty,     ErrorCode::degenerate_marginals,
    ErrorCode::unstable_estimate,    ErrorCode::validation_exhausted,
    ErrorCode::backend_timeout,      ErrorCode::backend_request,
    ErrorCode::backend_protocol,     ErrorCode::backend_unavailable,
    ErrorCode::internal,
};

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::bad_request: return "bad-request";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::invalid_transition: return "invalid-transition";
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::unknown_objective: return "unknown-objective";
    case ErrorCode::import_malformed: return "import-malformed";
    case ErrorCode::generation_empty: return "generation-empty";
    case ErrorCode::degenerate_marginals: return "degenerate-marginals";
    case ErrorCode::unstable_estimate: return "unstable-estimate";
    case ErrorCode::validation_exhausted: return "validation-exhausted";
    case ErrorCode::backend_timeout: return "backend-timeout";
    case ErrorCode::backend_request: return "backend-request";
    case ErrorCode::backend_protocol: return "backend-protocol";
    case ErrorCode::backend_unavailable: return "backend-unavailable";
    case ErrorCode::internal: return "internal";
  }
  return "internal";
}

std::span<const ErrorCode> all_error_codes() { return k_codes; }

}  // namespace arched
