#include "arched/assess.hpp"

#include "arched/error.hpp"
#include "arched/json_util.hpp"
#include "arched/util.hpp"

#include <array>

namespace arched {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 4> k_item_types = {"multiple-choice", "short-answer", "project-task",
                                                          "discussion-prompt"};

const llm::Schema& items_schema() {
  using llm::Schema;
  static const Schema s = [] {
    std::vector<std::string> types(k_item_types.begin(), k_item_types.end());
    // bloom_target is validated after parsing so mismatches are dropped and
    // audited instead of triggering a re-prompt.
    return Schema::object({{"items", Schema::array(Schema::object({{"item_type", Schema::enumeration(types)},
                                                                   {"stem", Schema::string(true)},
                                                                   {"answer_guide", Schema::string()},
                                                                   {"bloom_target", Schema::string(true)}}))}});
  }();
  return s;
}

}  // namespace

std::string_view to_string(ItemType t) { return k_item_types.at(static_cast<int>(t)); }

std::optional<ItemType> parse_item_type(std::string_view s) {
  const auto lowered = to_lower(trim(s));
  for (std::size_t i = 0; i < k_item_types.size(); ++i) {
    if (k_item_types[i] == lowered) return static_cast<ItemType>(i);
  }
  return std::nullopt;
}

void to_json(json& j, const AssessmentItem& v) {
  j = json{{"id", v.id},
           {"objective_id", v.objective_id},
           {"item_type", to_string(v.item_type)},
           {"stem", v.stem},
           {"answer_guide", v.answer_guide},
           {"bloom_target", to_string(v.bloom_target)}};
}

void from_json(const json& j, AssessmentItem& v) {
  v.id = jsonu::require_string(j, "id");
  v.objective_id = jsonu::require_string(j, "objective_id");
  const auto type = parse_item_type(jsonu::require_string(j, "item_type"));
  if (!type) throw Error(ErrorCode::bad_request, "unknown item_type");
  v.item_type = *type;
  v.stem = jsonu::require_string(j, "stem");
  v.answer_guide = jsonu::require_string(j, "answer_guide");
  const auto level = parse_level(jsonu::require_string(j, "bloom_target"));
  if (!level) throw Error(ErrorCode::bad_request, "unknown bloom_target");
  v.bloom_target = *level;
}

AssessmentDrafter::AssessmentDrafter(llm::Gateway& gateway, std::string model)
    : gateway_(gateway), model_(std::move(model)) {}

llm::ChatRequest AssessmentDrafter::build_prompt(const LearningObjective& obj, BloomLevel target, int count) const {
  llm::ChatRequest req;
  req.model = model_;
  req.temperature = 0.5;
  const json payload{{"objective_id", obj.id},
                     {"objective", obj.text},
                     {"bloom_target", to_string(target)},
                     {"count", count}};
  req.messages = {{llm::Role::system, render_template(template_text("assess_system_v1"),
                                                      {{"schema", llm::describe(items_schema()).dump(2)}})},
                  {llm::Role::user, render_template(template_text("assess_user_v1"), {{"request_json", payload.dump(2)}})}};
  return req;
}

DraftedItems AssessmentDrafter::draft(const LearningObjective& obj, BloomLevel target, int count) const {
  if (count < 1) throw Error(ErrorCode::invalid_input, "per_objective must be >= 1");
  const auto result = llm::complete_structured(gateway_, build_prompt(obj, target, count), items_schema());
  DraftedItems out;
  int ordinal = 0;
  for (const auto& item : result.value.at("items")) {
    const std::string level_name = item.at("bloom_target").get<std::string>();
    const auto level = parse_level(level_name);
    const bool consistent = level && (*level == target || (obj.bloom_declared && *level == *obj.bloom_declared));
    if (!consistent) {
      out.dropped.push_back("dropped item for " + obj.id + ": bloom_target '" + level_name +
                            "' does not match the objective level " + std::string(to_string(target)));
      continue;
    }
    if (static_cast<int>(out.items.size()) >= count) {
      out.dropped.push_back("dropped surplus item for " + obj.id);
      continue;
    }
    AssessmentItem a;
    a.objective_id = obj.id;
    a.item_type = *parse_item_type(item.at("item_type").get<std::string>());
    a.stem = item.at("stem").get<std::string>();
    a.answer_guide = item.value("answer_guide", std::string());
    a.bloom_target = *level;
    a.id = "item-" + hex64(fnv1a64(obj.id + "\x1f" + std::to_string(ordinal++) + "\x1f" + a.stem)).substr(0, 12);
    out.items.push_back(std::move(a));
  }
  return out;
}

}  // namespace arched
