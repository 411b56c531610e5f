#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace arched::log {

enum class Level { debug, info, warn, error };

using Sink = std::function<void(Level, std::string_view)>;

// Replaces the process-wide sink (default: stderr, info and above).
// Returns the previous sink so tests can restore it.
Sink set_sink(Sink sink);

void write(Level level, std::string_view message);

inline void debug(std::string_view m) { write(Level::debug, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void error(std::string_view m) { write(Level::error, m); }

}  // namespace arched::log
