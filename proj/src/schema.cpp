#include "arched/schema.hpp"

#include "arched/util.hpp"

#include <algorithm>

namespace arched::llm {

Schema Schema::object(std::vector<Field> fields) {
  Schema s;
  s.kind = Kind::object;
  s.fields = std::move(fields);
  return s;
}

Schema Schema::array(Schema item, std::size_t min_items) {
  Schema s;
  s.kind = Kind::array;
  s.items = std::make_shared<const Schema>(std::move(item));
  s.min_items = min_items;
  return s;
}

Schema Schema::string(bool non_empty) {
  Schema s;
  s.kind = Kind::string;
  s.non_empty = non_empty;
  return s;
}

Schema Schema::enumeration(std::vector<std::string> values) {
  Schema s;
  s.kind = Kind::string;
  s.enum_values = std::move(values);
  return s;
}

Schema Schema::integer(std::optional<long long> min, std::optional<long long> max) {
  Schema s;
  s.kind = Kind::integer;
  s.minimum = min;
  s.maximum = max;
  return s;
}

Schema Schema::number() {
  Schema s;
  s.kind = Kind::number;
  return s;
}

Schema Schema::boolean() {
  Schema s;
  s.kind = Kind::boolean;
  return s;
}

std::optional<std::string> validate(const nlohmann::json& value, const Schema& schema, const std::string& path) {
  using Kind = Schema::Kind;
  switch (schema.kind) {
    case Kind::object:
      if (!value.is_object()) return path + ": expected an object";
      for (const auto& f : schema.fields) {
        if (!value.contains(f.name) || value.at(f.name).is_null()) {
          if (f.required) return path + "." + f.name + ": required field missing";
          continue;
        }
        if (auto v = validate(value.at(f.name), f.schema, path + "." + f.name)) return v;
      }
      return std::nullopt;
    case Kind::array:
      if (!value.is_array()) return path + ": expected an array";
      if (value.size() < schema.min_items) {
        return path + ": expected at least " + std::to_string(schema.min_items) + " items";
      }
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (auto v = validate(value[i], *schema.items, path + "[" + std::to_string(i) + "]")) return v;
      }
      return std::nullopt;
    case Kind::string: {
      if (!value.is_string()) return path + ": expected a string";
      const auto s = value.get<std::string>();
      if (schema.non_empty && trim(s).empty()) return path + ": must be non-empty";
      if (!schema.enum_values.empty()) {
        const auto lowered = to_lower(trim(s));
        const bool ok = std::any_of(schema.enum_values.begin(), schema.enum_values.end(),
                                    [&](const std::string& e) { return to_lower(e) == lowered; });
        if (!ok) return path + ": '" + s + "' is not one of the allowed values";
      }
      return std::nullopt;
    }
    case Kind::integer: {
      long long v = 0;
      if (value.is_number_integer()) {
        v = value.get<long long>();
      } else if (value.is_number_float() && value.get<double>() == static_cast<double>(static_cast<long long>(value.get<double>()))) {
        v = static_cast<long long>(value.get<double>());
      } else {
        return path + ": expected an integer";
      }
      if (schema.minimum && v < *schema.minimum) return path + ": below minimum " + std::to_string(*schema.minimum);
      if (schema.maximum && v > *schema.maximum) return path + ": above maximum " + std::to_string(*schema.maximum);
      return std::nullopt;
    }
    case Kind::number:
      if (!value.is_number()) return path + ": expected a number";
      return std::nullopt;
    case Kind::boolean:
      if (!value.is_boolean()) return path + ": expected a boolean";
      return std::nullopt;
  }
  return path + ": unsupported schema";
}

nlohmann::json describe(const Schema& schema) {
  using Kind = Schema::Kind;
  switch (schema.kind) {
    case Kind::object: {
      nlohmann::json j = nlohmann::json::object();
      for (const auto& f : schema.fields) {
        auto d = describe(f.schema);
        if (!f.required && d.is_string()) d = d.get<std::string>() + " (optional)";
        j[f.name] = d;
      }
      return j;
    }
    case Kind::array:
      return nlohmann::json::array({describe(*schema.items)});
    case Kind::string: {
      if (schema.enum_values.empty()) return "string";
      std::string joined;
      for (const auto& e : schema.enum_values) joined += (joined.empty() ? "" : "|") + e;
      return "one of " + joined;
    }
    case Kind::integer: {
      std::string d = "integer";
      if (schema.minimum && schema.maximum) {
        d += " " + std::to_string(*schema.minimum) + ".." + std::to_string(*schema.maximum);
      }
      return d;
    }
    case Kind::number: return "number";
    case Kind::boolean: return "boolean";
  }
  return nullptr;
}

std::optional<nlohmann::json> extract_json_block(std::string_view text) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    const char open = text[start];
    if (open != '{' && open != '[') continue;
    // Bracket-balance scan that respects string literals.
    std::vector<char> stack;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{' || c == '[') stack.push_back(c);
      else if (c == '}' || c == ']') {
        if (stack.empty() || (c == '}' ? '{' : '[') != stack.back()) break;
        stack.pop_back();
        if (stack.empty()) {
          end = i + 1;
          break;
        }
      }
    }
    if (end == std::string_view::npos) continue;
    auto parsed = nlohmann::json::parse(text.substr(start, end - start), nullptr, false);
    if (!parsed.is_discarded()) return parsed;
  }
  return std::nullopt;
}

}  // namespace arched::llm
