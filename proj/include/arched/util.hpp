#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace arched {

// 64-bit FNV-1a. Used for prompt fingerprints, audit payload digests and
// the stub backend; not a security primitive.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// splitmix64 finalizer, for deriving independent seeds.
std::uint64_t mix64(std::uint64_t value);

using TimePoint = std::chrono::system_clock::time_point;
using Clock = std::function<TimePoint()>;

Clock system_clock();

// ISO-8601 UTC with millisecond precision, e.g. 2026-10-15T08:30:00.125Z.
// Lexicographic order equals chronological order.
std::string format_timestamp(TimePoint tp);
TimePoint parse_timestamp(std::string_view text);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);

// Replaces every {{key}} in the template. Unknown placeholders throw.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

// Template text from the embedded resource table; throws if missing.
std::string_view template_text(std::string_view name);

// Cuts text to at most max_chars bytes (on a UTF-8 boundary), appending
// the ellipsis marker when anything was removed.
std::string truncate_with_marker(std::string_view text, std::size_t max_chars);

inline constexpr std::string_view k_truncation_marker = " [...truncated]";

std::string random_id(std::string_view prefix);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace arched
