#pragma once

#include "arched/llm.hpp"
#include "arched/objective.hpp"
#include "arched/util.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace arched {

enum class Criterion { structural, taxonomic, measurable, clarity, technical };
inline constexpr std::array<Criterion, 5> k_all_criteria = {Criterion::structural, Criterion::taxonomic,
                                                            Criterion::measurable, Criterion::clarity,
                                                            Criterion::technical};
std::string_view key_of(Criterion c);    // "structural"
std::string_view label_of(Criterion c);  // "Structural"

struct RubricScores {
  int structural = 3;
  int taxonomic = 3;
  int measurable = 3;
  int clarity = 3;
  int technical = 3;
  std::map<std::string, std::string> notes;  // keyed by criterion key
  bool rule_fallback = false;

  int get(Criterion c) const;
  void set(Criterion c, int value);
  bool operator==(const RubricScores&) const = default;
};

enum class AssessedVia { llm, rule_fallback };
std::string_view to_string(AssessedVia v);

struct LevelVerdict {
  BloomLevel level = BloomLevel::Understand;
  std::string reasoning;
  AssessedVia via = AssessedVia::llm;
  bool low_confidence = false;
};

struct ObjectiveAnalysis {
  std::string objective_id;
  std::string text;
  BloomLevel assessed_level = BloomLevel::Understand;
  AssessedVia assessed_via = AssessedVia::llm;
  bool low_confidence = false;
  std::optional<bool> level_agrees_with_declared;  // absent: no declared level
  RubricScores rubric;
  std::string reasoning;
  std::vector<std::string> improvement_suggestions;

  bool operator==(const ObjectiveAnalysis&) const = default;
};

struct CriterionSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample (n-1) standard deviation; 0 when n = 1
  bool operator==(const CriterionSummary&) const = default;
};

// "4.1±0.4": one decimal each.
std::string format_mean_sd(double mean, double sd);

// Mean and sample SD; n = 1 gives SD 0.
CriterionSummary summarize(const std::vector<double>& values);

struct AnalysisReport {
  std::string set_id;
  std::vector<ObjectiveAnalysis> analyses;
  std::array<int, 6> distribution{};  // indexed by BloomLevel
  std::vector<BloomLevel> gaps;
  std::map<std::string, CriterionSummary> summary;  // keyed by criterion key
  std::string created_at;

  bool operator==(const AnalysisReport&) const = default;
};

void to_json(nlohmann::json& j, const RubricScores& v);
void from_json(const nlohmann::json& j, RubricScores& v);
void to_json(nlohmann::json& j, const ObjectiveAnalysis& v);
void from_json(const nlohmann::json& j, ObjectiveAnalysis& v);
void to_json(nlohmann::json& j, const AnalysisReport& v);
void from_json(const nlohmann::json& j, AnalysisReport& v);

enum class ReportFormat { json, markdown };
std::optional<ReportFormat> parse_report_format(std::string_view s);

std::string render_report(const AnalysisReport& report, ReportFormat format);

// Deterministic rubric derived from the rule checks alone.
RubricScores rule_rubric(const LearningObjective& obj);

struct OaeOptions {
  std::string model;  // empty: gateway default
  double temperature = 0.2;
};

// Objective Analysis Engine. Evaluates objectives and returns values; it
// never edits objectives and never calls the generator.
class OaeEngine {
 public:
  explicit OaeEngine(llm::Gateway& gateway, Clock clock = system_clock(), OaeOptions options = {});

  // Model failures fall back to the verb classifier; only empty text throws.
  LevelVerdict classify_level(const LearningObjective& obj) const;
  RubricScores score_rubric(const LearningObjective& obj) const;

  ObjectiveAnalysis analyze(const LearningObjective& obj) const;

  // Objectives are analyzed concurrently up to the gateway's max_in_flight;
  // output order follows input order.
  AnalysisReport analyze_set(const ObjectiveSet& set) const;

  llm::ChatRequest build_classify_prompt(const LearningObjective& obj) const;
  llm::ChatRequest build_rubric_prompt(const LearningObjective& obj) const;

 private:
  std::pair<RubricScores, std::vector<std::string>> score_with_suggestions(const LearningObjective& obj) const;

  llm::Gateway& gateway_;
  Clock clock_;
  OaeOptions options_;
};

// Assembles distribution, gaps and summary from ordered analyses.
AnalysisReport assemble_report(std::string set_id, std::vector<ObjectiveAnalysis> analyses, std::string created_at);

}  // namespace arched
