#pragma once

#include "arched/error.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

// Field accessors that turn schema violations into bad-request errors.
namespace arched::jsonu {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::bad_request, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

inline std::string require_string(const nlohmann::json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw Error(ErrorCode::bad_request, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& v = j.at(key);
  if (!v.is_string()) throw Error(ErrorCode::bad_request, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& value) {
  if (value) j[key] = *value;
}

}  // namespace arched::jsonu
