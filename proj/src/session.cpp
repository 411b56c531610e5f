#include "arched/session.hpp"

#include "arched/error.hpp"
#include "arched/json_util.hpp"
#include "arched/log.hpp"
#include "arched/util.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

namespace arched {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 6> k_states = {"Draft",    "Generating",      "Review",
                                                      "Analyzed", "AssessmentDraft", "Finalized"};
constexpr std::array<std::string_view, 4> k_actors = {"educator", "logs", "oae", "system"};
constexpr std::array<std::string_view, 9> k_actions = {
    "session-created",   "spec-updated",        "objectives-generated", "objectives-regenerated",
    "objectives-imported", "curation-applied",  "analysis-completed",   "assessments-drafted",
    "session-finalized"};

}  // namespace

std::string_view to_string(SessionState s) { return k_states.at(static_cast<int>(s)); }

std::optional<SessionState> parse_session_state(std::string_view s) {
  for (std::size_t i = 0; i < k_states.size(); ++i) {
    if (k_states[i] == s) return static_cast<SessionState>(i);
  }
  return std::nullopt;
}

bool transition_allowed(SessionState from, SessionState to) {
  using S = SessionState;
  switch (from) {
    case S::Draft: return to == S::Generating || to == S::Review;  // Review: via import
    case S::Generating: return to == S::Review;
    case S::Review: return to == S::Generating || to == S::Analyzed;
    case S::Analyzed: return to == S::Review || to == S::AssessmentDraft;
    case S::AssessmentDraft: return to == S::Finalized;
    case S::Finalized: return false;
  }
  return false;
}

std::string_view to_string(Actor a) { return k_actors.at(static_cast<int>(a)); }
std::string_view to_string(AuditAction a) { return k_actions.at(static_cast<int>(a)); }

void to_json(json& j, const AuditEvent& v) {
  j = json{{"timestamp", v.timestamp},
           {"actor", to_string(v.actor)},
           {"action", to_string(v.action)},
           {"payload_digest", v.payload_digest},
           {"note", v.note}};
}

void from_json(const json& j, AuditEvent& v) {
  v.timestamp = jsonu::require_string(j, "timestamp");
  const auto actor = jsonu::require_string(j, "actor");
  const auto action = jsonu::require_string(j, "action");
  const auto a = std::find(k_actors.begin(), k_actors.end(), actor);
  const auto b = std::find(k_actions.begin(), k_actions.end(), action);
  if (a == k_actors.end() || b == k_actions.end()) throw Error(ErrorCode::bad_request, "unknown audit actor or action");
  v.actor = static_cast<Actor>(a - k_actors.begin());
  v.action = static_cast<AuditAction>(b - k_actions.begin());
  v.payload_digest = jsonu::require_string(j, "payload_digest");
  v.note = j.value("note", std::string());
}

void to_json(json& j, const Session& v) {
  j = json{{"schema_version", k_session_schema_version},
           {"id", v.id},
           {"title", v.title},
           {"spec", v.spec},
           {"state", to_string(v.state)},
           {"batches", v.batches},
           {"imports", v.imports},
           {"working_set", v.working_set},
           {"reports", v.reports},
           {"assessments", v.assessments},
           {"audit", v.audit},
           {"created_at", v.created_at},
           {"updated_at", v.updated_at},
           {"version", v.version}};
}

void from_json(const json& j, Session& v) {
  const int schema = j.value("schema_version", 0);
  if (schema != k_session_schema_version) {
    throw Error(ErrorCode::bad_request, "unsupported session schema_version " + std::to_string(schema));
  }
  v.id = jsonu::require_string(j, "id");
  v.title = jsonu::require_string(j, "title");
  v.spec = jsonu::require(j, "spec").get<GenerationSpec>();
  const auto state = parse_session_state(jsonu::require_string(j, "state"));
  if (!state) throw Error(ErrorCode::bad_request, "unknown session state");
  v.state = *state;
  v.batches = jsonu::require(j, "batches").get<std::vector<GenerationBatch>>();
  v.imports = jsonu::require(j, "imports").get<std::vector<ObjectiveSet>>();
  v.working_set = jsonu::require(j, "working_set").get<ObjectiveSet>();
  v.reports = jsonu::require(j, "reports").get<std::vector<AnalysisReport>>();
  v.assessments = jsonu::require(j, "assessments").get<std::vector<AssessmentItem>>();
  v.audit = jsonu::require(j, "audit").get<std::vector<AuditEvent>>();
  v.created_at = jsonu::require_string(j, "created_at");
  v.updated_at = jsonu::require_string(j, "updated_at");
  v.version = jsonu::require(j, "version").get<std::uint64_t>();
}

namespace workflow {

namespace {

std::string now(const Session& s, const SessionEngines& engines) {
  std::string ts = format_timestamp(engines.clock());
  // Audit timestamps never go backwards even if the wall clock does.
  if (!s.audit.empty() && ts < s.audit.back().timestamp) ts = s.audit.back().timestamp;
  return ts;
}

void record(Session& s, const SessionEngines& engines, Actor actor, AuditAction action, const json& payload,
            std::string note) {
  AuditEvent e;
  e.timestamp = now(s, engines);
  e.actor = actor;
  e.action = action;
  e.payload_digest = hex64(fnv1a64(payload.dump()));
  e.note = std::move(note);
  s.updated_at = e.timestamp;
  s.audit.push_back(std::move(e));
}

void require_state(const Session& s, std::initializer_list<SessionState> allowed, std::string_view op) {
  if (std::find(allowed.begin(), allowed.end(), s.state) == allowed.end()) {
    throw Error(ErrorCode::invalid_transition,
                std::string(op) + " is not allowed in state " + std::string(to_string(s.state)),
                {{"state", to_string(s.state)}, {"operation", op}});
  }
}

void move_to(Session& s, SessionState to) {
  if (s.state == to) return;
  if (!transition_allowed(s.state, to)) {
    throw Error(ErrorCode::internal, "undefined transition " + std::string(to_string(s.state)) + " -> " +
                                         std::string(to_string(to)));
  }
  s.state = to;
}

template <typename T>
const T& need(const T* p, std::string_view what) {
  if (!p) throw Error(ErrorCode::internal, std::string(what) + " is not configured");
  return *p;
}

GenerationOptions options_for(const Session& s) {
  GenerationOptions o;
  o.variation = static_cast<int>(s.batches.size());
  o.id_salt = s.id + "/" + std::to_string(s.batches.size());
  return o;
}

}  // namespace

std::vector<LearningObjective> all_objectives(const Session& s) {
  std::vector<LearningObjective> out;
  std::unordered_set<std::string> seen;
  const auto take = [&](const std::vector<LearningObjective>& objs) {
    for (const auto& o : objs) {
      if (seen.insert(o.id).second) out.push_back(o);
    }
  };
  for (const auto& b : s.batches) take(b.objectives);
  for (const auto& set : s.imports) take(set.objectives);
  return out;
}

ObjectiveSet compute_working_set(const Session& s) {
  ObjectiveSet ws;
  ws.id = s.id + "-working";
  ws.title = s.title;
  ws.created_at = s.created_at;
  ws.source = s.id;
  for (auto& o : all_objectives(s)) {
    if (o.curation == Curation::selected) ws.objectives.push_back(std::move(o));
  }
  return ws;
}

Session create_session(const std::string& title, const GenerationSpec& spec, const SessionEngines& engines,
                       std::string id) {
  spec.validate();
  Session s;
  s.id = id.empty() ? random_id("s-") : std::move(id);
  s.title = trim(title).empty() ? "Untitled session" : title;
  s.spec = spec;
  s.state = SessionState::Draft;
  s.created_at = format_timestamp(engines.clock());
  s.updated_at = s.created_at;
  s.working_set = compute_working_set(s);
  record(s, engines, Actor::educator, AuditAction::session_created, json{{"title", s.title}, {"spec", spec}},
         "session created");
  return s;
}

Session update_spec(Session s, const GenerationSpec& spec, const SessionEngines& engines) {
  require_state(s, {SessionState::Draft, SessionState::Review}, "update_spec");
  spec.validate();
  s.spec = spec;
  record(s, engines, Actor::educator, AuditAction::spec_updated, json(spec), "generation parameters updated");
  return s;
}

Session run_generation(Session s, const SessionEngines& engines) {
  require_state(s, {SessionState::Draft, SessionState::Review}, "generate");
  move_to(s, SessionState::Generating);
  GenerationBatch batch = need(engines.logs, "generation engine").generate(s.spec, options_for(s));
  std::string note = "generated " + std::to_string(batch.objectives.size()) + " candidates (prompt " +
                     batch.prompt_fingerprint + ")";
  for (const auto& n : batch.audit_notes) note += "; " + n;
  const json payload = batch;
  s.batches.push_back(std::move(batch));
  move_to(s, SessionState::Review);
  record(s, engines, Actor::logs, AuditAction::objectives_generated, payload, std::move(note));
  return s;
}

Session regenerate(Session s, const std::string& feedback, const std::set<std::string>& keep,
                   const SessionEngines& engines) {
  require_state(s, {SessionState::Review}, "regenerate");
  if (s.batches.empty()) throw Error(ErrorCode::precondition, "generate objectives before regenerating");
  move_to(s, SessionState::Generating);
  GenerationBatch base = s.batches.back();
  base.spec = s.spec;
  GenerationBatch batch = need(engines.logs, "generation engine").regenerate(base, feedback, keep, options_for(s));
  std::string note = "regenerated with " + std::to_string(keep.size()) + " kept objectives; feedback digest " +
                     hex64(fnv1a64(feedback));
  for (const auto& n : batch.audit_notes) note += "; " + n;
  const json payload{{"batch", batch}, {"feedback", feedback}};
  s.batches.push_back(std::move(batch));
  move_to(s, SessionState::Review);
  s.working_set = compute_working_set(s);
  record(s, engines, Actor::logs, AuditAction::objectives_regenerated, payload, std::move(note));
  return s;
}

Session import_objectives(Session s, const ObjectiveSet& set, const SessionEngines& engines) {
  require_state(s, {SessionState::Draft, SessionState::Review}, "import");
  if (set.objectives.empty()) throw Error(ErrorCode::invalid_input, "import holds no objectives");
  std::unordered_set<std::string> existing;
  for (const auto& o : all_objectives(s)) existing.insert(o.id);
  for (const auto& o : set.objectives) {
    if (existing.contains(o.id)) {
      throw Error(ErrorCode::conflict, "objective id '" + o.id + "' already exists in this session", {{"id", o.id}});
    }
    if (o.curation != Curation::pending) {
      throw Error(ErrorCode::invalid_input, "imported objectives must start pending");
    }
  }
  const json payload = set;
  s.imports.push_back(set);
  move_to(s, SessionState::Review);
  record(s, engines, Actor::educator, AuditAction::objectives_imported, payload,
         "imported " + std::to_string(set.objectives.size()) + " objectives from " + set.source);
  return s;
}

Session curate(Session s, const std::map<std::string, Curation>& decisions, const SessionEngines& engines) {
  require_state(s, {SessionState::Review, SessionState::Analyzed}, "curate");
  if (decisions.empty()) throw Error(ErrorCode::invalid_input, "no curation decisions given");
  std::map<std::string, Curation> current;
  for (const auto& o : all_objectives(s)) current[o.id] = o.curation;
  for (const auto& [id, to] : decisions) {
    const auto it = current.find(id);
    if (it == current.end()) {
      throw Error(ErrorCode::unknown_objective, "unknown objective id '" + id + "'", {{"id", id}});
    }
    if (!curation_transition_allowed(it->second, to)) {
      throw Error(ErrorCode::invalid_input, "objective '" + id + "' cannot return to pending", {{"id", id}});
    }
  }
  const auto apply = [&](std::vector<LearningObjective>& objs) {
    for (auto& o : objs) {
      if (const auto it = decisions.find(o.id); it != decisions.end()) o.curation = it->second;
    }
  };
  for (auto& b : s.batches) apply(b.objectives);
  for (auto& set : s.imports) apply(set.objectives);
  s.working_set = compute_working_set(s);
  if (s.state == SessionState::Analyzed) move_to(s, SessionState::Review);
  json payload = json::object();
  int selected = 0;
  for (const auto& [id, c] : decisions) {
    payload[id] = to_string(c);
    selected += c == Curation::selected;
  }
  record(s, engines, Actor::educator, AuditAction::curation_applied, payload,
         std::to_string(decisions.size()) + " decisions (" + std::to_string(selected) + " selected); working set " +
             std::to_string(s.working_set.objectives.size()));
  return s;
}

Session run_analysis(Session s, const SessionEngines& engines) {
  require_state(s, {SessionState::Review}, "analyze");
  s.working_set = compute_working_set(s);
  if (s.working_set.objectives.empty()) {
    throw Error(ErrorCode::precondition, "select at least one objective before running the analysis");
  }
  AnalysisReport report = need(engines.oae, "analysis engine").analyze_set(s.working_set);
  std::string note = "analyzed " + std::to_string(report.analyses.size()) + " objectives; gaps:";
  if (report.gaps.empty()) note += " none";
  for (auto g : report.gaps) note += " " + std::string(to_string(g));
  const json payload = report;
  s.reports.push_back(std::move(report));
  move_to(s, SessionState::Analyzed);
  record(s, engines, Actor::oae, AuditAction::analysis_completed, payload, std::move(note));
  return s;
}

Session draft_assessments(Session s, int per_objective, const SessionEngines& engines) {
  require_state(s, {SessionState::Analyzed}, "draft_assessments");
  if (per_objective < 1 || per_objective > 10) throw Error(ErrorCode::invalid_input, "per_objective must be in 1..10");
  const auto& drafter = need(engines.drafter, "assessment drafter");
  const AnalysisReport* report = s.reports.empty() ? nullptr : &s.reports.back();
  std::vector<AssessmentItem> items;
  std::vector<std::string> dropped;
  for (const auto& obj : s.working_set.objectives) {
    std::optional<BloomLevel> target = obj.bloom_declared;
    if (report) {
      for (const auto& a : report->analyses) {
        if (a.objective_id == obj.id) target = a.assessed_level;
      }
    }
    const auto drafted = drafter.draft(obj, target.value_or(BloomLevel::Understand), per_objective);
    items.insert(items.end(), drafted.items.begin(), drafted.items.end());
    dropped.insert(dropped.end(), drafted.dropped.begin(), drafted.dropped.end());
  }
  const json payload = items;
  s.assessments = std::move(items);
  move_to(s, SessionState::AssessmentDraft);
  std::string note = "drafted " + std::to_string(s.assessments.size()) + " assessment items";
  for (const auto& d : dropped) note += "; dropped: " + d;
  record(s, engines, Actor::system, AuditAction::assessments_drafted, payload, std::move(note));
  return s;
}

Session finalize(Session s, const SessionEngines& engines) {
  require_state(s, {SessionState::AssessmentDraft}, "finalize");
  move_to(s, SessionState::Finalized);
  record(s, engines, Actor::educator, AuditAction::session_finalized,
         json{{"objectives", s.working_set}, {"assessments", s.assessments}}, "session finalized");
  return s;
}

}  // namespace workflow

}  // namespace arched
