#pragma once

#include <string_view>

namespace arched {

// Engine marker tags placed in system prompts. The stub backend dispatches
// on them and audit logs use them to identify the calling engine.
inline constexpr std::string_view k_logs_marker = "[ARCHED:LOGS:v1]";
inline constexpr std::string_view k_oae_marker = "[ARCHED:OAE:v1]";
inline constexpr std::string_view k_assess_marker = "[ARCHED:ASSESS:v1]";

}  // namespace arched
