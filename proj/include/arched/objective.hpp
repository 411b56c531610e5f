#pragma once

#include "arched/bloom.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace arched {

enum class Provenance { generated, imported, human_authored };
enum class Curation { pending, selected, rejected };

enum class GradeLevel {
  primary,
  middle,
  secondary,
  undergraduate_intro,
  undergraduate_advanced,
  graduate,
  professional,
};

std::string_view to_string(Provenance p);
std::string_view to_string(Curation c);
std::string_view to_string(GradeLevel g);
std::optional<Provenance> parse_provenance(std::string_view s);
std::optional<Curation> parse_curation(std::string_view s);
std::optional<GradeLevel> parse_grade_level(std::string_view s);

// pending -> selected|rejected, selected <-> rejected. Never back to pending.
bool curation_transition_allowed(Curation from, Curation to);

// Spans of an objective sentence; each is a substring of the objective text.
struct AbcdParts {
  std::optional<std::string> audience;
  std::string behavior;
  std::optional<std::string> condition;
  std::optional<std::string> degree;

  int present_count() const;
  bool operator==(const AbcdParts&) const = default;
};

struct LearningObjective {
  std::string id;
  std::string text;
  std::optional<std::string> subject;
  std::optional<GradeLevel> grade_level;
  std::optional<AbcdParts> abcd;
  std::optional<BloomLevel> bloom_declared;
  std::optional<BloomLevel> bloom_assessed;
  Provenance provenance = Provenance::human_authored;
  Curation curation = Curation::pending;
  std::optional<std::string> rationale;

  bool operator==(const LearningObjective&) const = default;
};

// Throws invalid-input when text is empty or holds several lines.
void validate_objective_text(std::string_view text);

inline constexpr int k_max_objectives_per_request = 50;

struct GenerationSpec {
  GradeLevel grade_level = GradeLevel::undergraduate_intro;
  std::string subject;
  std::string topic;
  std::set<BloomLevel> target_levels;
  int count_per_level = 1;
  std::optional<std::string> extra_context;

  // Throws invalid-input naming the offending field.
  void validate() const;
  bool operator==(const GenerationSpec&) const = default;
};

struct ObjectiveSet {
  std::string id;
  std::string title;
  std::vector<LearningObjective> objectives;
  std::string created_at;
  std::string source;

  bool operator==(const ObjectiveSet&) const = default;
};

// --- structural quality model -------------------------------------------

// Configurable surface patterns for the ABCD detector.
struct AbcdRules {
  std::vector<std::string> audience_terms = {"the learners", "the learner", "the students",
                                             "the student",  "students",    "student",
                                             "learners",     "learner",     "participants",
                                             "participant",  "trainees",    "trainee"};
  std::vector<std::string> condition_openers = {"given", "using", "when", "with access to"};
  // Verbs that name no observable behavior ("be aware" is matched as a pair).
  std::vector<std::string> deny_verbs = {"understand", "know", "appreciate", "learn"};

  static const AbcdRules& defaults();
};

struct AbcdReport {
  std::optional<std::string> audience;
  std::optional<std::string> behavior;
  std::optional<std::string> condition;
  std::optional<std::string> degree;
  std::optional<std::string> behavior_lemma;  // operative verb, when found
  std::optional<std::string> failure;         // "no observable behavior"

  bool ok() const { return behavior.has_value(); }
  int present_count() const;
  std::optional<AbcdParts> parts() const;
};

inline constexpr std::string_view k_no_observable_behavior = "no observable behavior";

AbcdReport decompose_abcd(std::string_view text, const VerbLexicon& lexicon = default_lexicon(),
                          const AbcdRules& rules = AbcdRules::defaults());

bool is_deny_verb(std::string_view lemma, const AbcdRules& rules = AbcdRules::defaults());

struct SmartChecklist {
  bool specific = false;
  bool measurable = false;
  bool achievable = true;  // delegated to the LLM rubric
  bool relevant = true;    // delegated to the LLM rubric
  bool time_bound = false;
  bool delegated = true;

  int score() const;
};

SmartChecklist check_smart(const LearningObjective& obj,
                           const VerbLexicon& lexicon = default_lexicon(),
                           const AbcdRules& rules = AbcdRules::defaults());

// --- import / export ------------------------------------------------------

enum class SetFormat { csv, json };
std::optional<SetFormat> parse_set_format(std::string_view s);

// Column order of the canonical CSV export. Import requires a header and
// accepts any subset of these columns in any order; only `text` is
// mandatory.
const std::vector<std::string>& objective_csv_columns();

ObjectiveSet import_set(std::string_view payload, SetFormat format,
                        const std::string& source = "upload", const std::string& created_at = {});

std::string export_set(const ObjectiveSet& set, SetFormat format);

// --- JSON -------------------------------------------------------------------

void to_json(nlohmann::json& j, const AbcdParts& v);
void from_json(const nlohmann::json& j, AbcdParts& v);
void to_json(nlohmann::json& j, const LearningObjective& v);
void from_json(const nlohmann::json& j, LearningObjective& v);
void to_json(nlohmann::json& j, const GenerationSpec& v);
void from_json(const nlohmann::json& j, GenerationSpec& v);
void to_json(nlohmann::json& j, const ObjectiveSet& v);
void from_json(const nlohmann::json& j, ObjectiveSet& v);

}  // namespace arched
