#pragma once

#include <nlohmann/json.hpp>

#include <span>

#include <stdexcept>
#include <string>
#include <string_view>

namespace arched {

// Closed set of machine-readable error codes. The API maps each one to a
// single HTTP status (see api::status_for).
enum class ErrorCode {
  bad_request,
  invalid_input,
  invalid_transition,
  not_found,
  conflict,
  precondition,
  unknown_objective,
  import_malformed,
  generation_empty,
  degenerate_marginals,
  unstable_estimate,
  validation_exhausted,
  backend_timeout,
  backend_request,
  backend_protocol,
  backend_unavailable,
  internal,
};

std::string_view to_string(ErrorCode code);

// Every ErrorCode value, in declaration order.
std::span<const ErrorCode> all_error_codes();

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nullptr)
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace arched
