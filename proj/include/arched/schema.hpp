#pragma once

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace arched::llm {

// Response-shape descriptor for structured model output.
struct Schema {
  enum class Kind { object, array, string, integer, number, boolean };

  struct Field;

  Kind kind = Kind::string;
  std::vector<Field> fields;                // object
  std::shared_ptr<const Schema> items;      // array
  std::size_t min_items = 0;                // array
  std::vector<std::string> enum_values;     // string; matched case-insensitively
  bool non_empty = false;                   // string
  std::optional<long long> minimum, maximum;  // integer

  static Schema object(std::vector<Field> fields);
  static Schema array(Schema item, std::size_t min_items = 0);
  static Schema string(bool non_empty = false);
  static Schema enumeration(std::vector<std::string> values);
  static Schema integer(std::optional<long long> min = std::nullopt, std::optional<long long> max = std::nullopt);
  static Schema number();
  static Schema boolean();
};

struct Schema::Field {
  std::string name;
  Schema schema;
  bool required = true;
};

// First violation as "path: problem", or nullopt when the value conforms.
std::optional<std::string> validate(const nlohmann::json& value, const Schema& schema,
                                    const std::string& path = "$");

// Example-shaped rendering of the schema for inclusion in prompts.
nlohmann::json describe(const Schema& schema);

// First balanced {...} or [...] span in the text that parses as JSON.
// Surrounding prose and code fences are ignored.
std::optional<nlohmann::json> extract_json_block(std::string_view text);

}  // namespace arched::llm
