#include "arched/log.hpp"

#include <iostream>
#include <mutex>

namespace arched::log {

namespace {

std::mutex g_mutex;

void stderr_sink(Level level, std::string_view message) {
  if (level == Level::debug) return;
  static constexpr const char* names[] = {"debug", "info", "warn", "error"};
  std::cerr << "[arched " << names[static_cast<int>(level)] << "] " << message << '\n';
}

Sink& current() {
  static Sink sink = stderr_sink;
  return sink;
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(g_mutex);
  Sink previous = std::move(current());
  current() = sink ? std::move(sink) : Sink(stderr_sink);
  return previous;
}

void write(Level level, std::string_view message) {
  std::lock_guard lock(g_mutex);
  current()(level, message);
}

}  // namespace arched::log
