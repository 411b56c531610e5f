#pragma once

#include "arched/llm.hpp"
#include "arched/objective.hpp"
#include "arched/util.hpp"

#include <set>
#include <string>
#include <vector>

namespace arched {

struct GenerationBatch {
  GenerationSpec spec;
  std::vector<LearningObjective> objectives;
  std::string prompt_fingerprint;
  std::string created_at;
  std::vector<std::string> audit_notes;

  bool operator==(const GenerationBatch&) const = default;
};

void to_json(nlohmann::json& j, const GenerationBatch& v);
void from_json(const nlohmann::json& j, GenerationBatch& v);

struct GenerationOptions {
  // Distinguishes repeated generation rounds for the same spec, both in
  // the prompt and in the objective ids.
  int variation = 0;
  std::string id_salt;
  std::string model;  // empty: gateway default
  double temperature = 0.8;
};

inline constexpr std::size_t k_prompt_char_limit = 20000;
inline constexpr std::size_t k_free_text_limit = 300;
inline constexpr std::size_t k_extra_context_limit = 4000;
inline constexpr std::size_t k_feedback_limit = 4000;
inline constexpr std::size_t k_kept_exemplar_limit = 30;

// Learning Objective Generation System: proposes candidates, never decides.
class LogsEngine {
 public:
  explicit LogsEngine(llm::Gateway& gateway, Clock clock = system_clock());

  llm::ChatRequest build_generation_prompt(const GenerationSpec& spec, const GenerationOptions& options = {}) const;

  // Prompt for a revision round: kept objectives become fixed exemplars
  // and the educator feedback is embedded verbatim.
  llm::ChatRequest build_regeneration_prompt(const GenerationSpec& spec, const std::vector<LearningObjective>& kept,
                                             const std::string& feedback, const GenerationOptions& options = {}) const;

  GenerationBatch generate(const GenerationSpec& spec, const GenerationOptions& options = {}) const;

  // keep must be a subset of the batch's objective ids.
  GenerationBatch regenerate(const GenerationBatch& batch, const std::string& feedback,
                             const std::set<std::string>& keep, const GenerationOptions& options = {}) const;

  static const llm::Schema& output_schema();

 private:
  GenerationBatch run(const GenerationSpec& spec, llm::ChatRequest request, const GenerationOptions& options) const;

  llm::Gateway& gateway_;
  Clock clock_;
};

std::string prompt_fingerprint(const llm::ChatRequest& request);

}  // namespace arched
