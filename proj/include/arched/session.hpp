#pragma once

#include "arched/assess.hpp"
#include "arched/logs.hpp"
#include "arched/oae.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace arched {

enum class SessionState { Draft, Generating, Review, Analyzed, AssessmentDraft, Finalized };
std::string_view to_string(SessionState s);
std::optional<SessionState> parse_session_state(std::string_view s);

// Direct edges of the session state machine. Generating is transient: a
// generation call passes through it and lands in Review.
bool transition_allowed(SessionState from, SessionState to);

enum class Actor { educator, logs, oae, system };
std::string_view to_string(Actor a);

enum class AuditAction {
  session_created,
  spec_updated,
  objectives_generated,
  objectives_regenerated,
  objectives_imported,
  curation_applied,
  analysis_completed,
  assessments_drafted,
  session_finalized,
};
std::string_view to_string(AuditAction a);

struct AuditEvent {
  std::string timestamp;
  Actor actor = Actor::system;
  AuditAction action = AuditAction::session_created;
  std::string payload_digest;
  std::string note;

  bool operator==(const AuditEvent&) const = default;
};

inline constexpr int k_session_schema_version = 1;

struct Session {
  std::string id;
  std::string title;
  GenerationSpec spec;
  SessionState state = SessionState::Draft;
  std::vector<GenerationBatch> batches;
  std::vector<ObjectiveSet> imports;
  ObjectiveSet working_set;  // selected objectives across batches and imports
  std::vector<AnalysisReport> reports;
  std::vector<AssessmentItem> assessments;
  std::vector<AuditEvent> audit;
  std::string created_at;
  std::string updated_at;
  std::uint64_t version = 0;  // optimistic-concurrency counter, bumped on save

  bool operator==(const Session&) const = default;
};

void to_json(nlohmann::json& j, const AuditEvent& v);
void from_json(const nlohmann::json& j, AuditEvent& v);
void to_json(nlohmann::json& j, const Session& v);
// Throws bad-request on an unsupported schema_version.
void from_json(const nlohmann::json& j, Session& v);

// Collaborators used by the session operations. Any may be null when the
// caller never invokes an operation that needs it.
struct SessionEngines {
  const LogsEngine* logs = nullptr;
  const OaeEngine* oae = nullptr;
  const AssessmentDrafter* drafter = nullptr;
  Clock clock = system_clock();
};

// Session operations. Each takes the session by value and returns the
// updated value; on error the caller's session is untouched. Every accepted
// mutation appends exactly one audit event.
namespace workflow {

Session create_session(const std::string& title, const GenerationSpec& spec, const SessionEngines& engines,
                       std::string id = {});
Session update_spec(Session s, const GenerationSpec& spec, const SessionEngines& engines);
Session run_generation(Session s, const SessionEngines& engines);
Session regenerate(Session s, const std::string& feedback, const std::set<std::string>& keep,
                   const SessionEngines& engines);
Session import_objectives(Session s, const ObjectiveSet& set, const SessionEngines& engines);
Session curate(Session s, const std::map<std::string, Curation>& decisions, const SessionEngines& engines);
Session run_analysis(Session s, const SessionEngines& engines);
Session draft_assessments(Session s, int per_objective, const SessionEngines& engines);
Session finalize(Session s, const SessionEngines& engines);

// All objectives (first copy per id) across batches then imports.
std::vector<LearningObjective> all_objectives(const Session& s);
ObjectiveSet compute_working_set(const Session& s);

}  // namespace workflow

}  // namespace arched
