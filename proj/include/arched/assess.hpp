#pragma once

#include "arched/llm.hpp"
#include "arched/objective.hpp"

#include <optional>
#include <string>
#include <vector>

namespace arched {

enum class ItemType { multiple_choice, short_answer, project_task, discussion_prompt };
std::string_view to_string(ItemType t);
std::optional<ItemType> parse_item_type(std::string_view s);

struct AssessmentItem {
  std::string id;
  std::string objective_id;
  ItemType item_type = ItemType::short_answer;
  std::string stem;
  std::string answer_guide;
  BloomLevel bloom_target = BloomLevel::Remember;

  bool operator==(const AssessmentItem&) const = default;
};

void to_json(nlohmann::json& j, const AssessmentItem& v);
void from_json(const nlohmann::json& j, AssessmentItem& v);

struct DraftedItems {
  std::vector<AssessmentItem> items;
  std::vector<std::string> dropped;  // one note per rejected item
};

// Drafts assessment items for one finalized objective.
class AssessmentDrafter {
 public:
  explicit AssessmentDrafter(llm::Gateway& gateway, std::string model = {});

  llm::ChatRequest build_prompt(const LearningObjective& obj, BloomLevel target, int count) const;

  // Items whose bloom_target is neither `target` nor the objective's
  // declared level are dropped and reported.
  DraftedItems draft(const LearningObjective& obj, BloomLevel target, int count) const;

 private:
  llm::Gateway& gateway_;
  std::string model_;
};

}  // namespace arched
