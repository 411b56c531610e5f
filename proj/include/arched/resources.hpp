#pragma once

#include <optional>
#include <string_view>
#include <utility>

// Text resources compiled into the library (see cmake/EmbedResources.cmake).
namespace arched::resources {

std::optional<std::string_view> find(std::string_view name);

}  // namespace arched::resources
