#include "arched/bloom.hpp"
#include "arched/llm.hpp"
#include "arched/markers.hpp"
#include "arched/objective.hpp"
#include "arched/util.hpp"

#include <array>
#include <cstdio>

namespace arched::llm {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 6> k_level_gloss = {
    "retrieving facts and terms from memory",
    "constructing meaning from instructional material",
    "carrying out a procedure in a concrete situation",
    "breaking material into parts and relating them",
    "judging work against criteria and standards",
    "combining elements into a new, coherent product",
};

// Every template places the action verb before any caller-supplied text so
// the operative verb is the first lexicon hit.
constexpr std::array<std::string_view, 4> k_objective_templates = {
    "Students will {verb} the core ideas of {topic} in a short written response",
    "Students will {verb} key concepts of {topic} with at least 80% accuracy",
    "Given a worked example, students will {verb} the main components of {topic} within a 50-minute session",
    "Learners will {verb} a solution to a problem in {topic} using course materials",
};

std::string replace_all(std::string s, std::string_view key, std::string_view value) {
  for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
    s.replace(pos, key.size(), value);
  }
  return s;
}

json first_block(const ChatRequest& req, bool last_user) {
  json found;
  for (const auto& m : req.messages) {
    if (m.role != Role::user) continue;
    if (auto b = extract_json_block(m.content); b && b->is_object()) {
      if (!last_user) return *b;
      found = *b;
    }
  }
  return found;
}

std::string logs_content(const ChatRequest& req, std::uint64_t h) {
  const json request = first_block(req, false);
  const json latest = first_block(req, true);
  std::vector<std::pair<BloomLevel, int>> wanted;
  if (latest.contains("shortfall")) {
    for (const auto& [name, n] : latest["shortfall"].items()) {
      if (auto l = parse_level(name)) wanted.emplace_back(*l, n.get<int>());
    }
  } else {
    const int count = request.value("count_per_level", 1);
    for (const auto& name : request.value("target_levels", json::array())) {
      if (auto l = parse_level(name.get<std::string>())) wanted.emplace_back(*l, count);
    }
  }
  const std::string topic = request.value("topic", std::string("the course topic"));

  json items = json::array();
  for (const auto& [level, count] : wanted) {
    const auto verbs = verbs_for_level(level);
    const std::uint64_t lh = mix64(h ^ static_cast<std::uint64_t>(index(level) + 1) * 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < count; ++i) {
      const auto& verb = verbs[(lh + static_cast<std::uint64_t>(i)) % verbs.size()];
      const auto tmpl = k_objective_templates[mix64(lh + static_cast<std::uint64_t>(i)) % k_objective_templates.size()];
      std::string text = replace_all(replace_all(std::string(tmpl), "{verb}", verb), "{topic}", topic);
      std::string rationale = "\"" + verb + "\" is a " + std::string(to_string(level)) +
                              "-level action verb; the objective asks learners to " + verb + " material from " +
                              topic + ", which exercises " + std::string(k_level_gloss[index(level)]) + ".";
      items.push_back({{"text", std::move(text)}, {"level", to_string(level)}, {"rationale", std::move(rationale)}});
    }
  }
  return "Drafted objectives for the requested levels.\n```json\n" + json{{"objectives", items}}.dump(2) + "\n```\n";
}

std::string oae_content(const ChatRequest& req) {
  const json request = first_block(req, false);
  const json objective = request.value("objective", json::object());
  const std::string text = objective.value("text", std::string());
  if (trim(text).empty()) return "No objective text was supplied.";
  const auto classified = classify_by_verb(text);
  const BloomLevel level = classified.value_or(BloomLevel::Understand);
  const auto abcd = decompose_abcd(text);

  if (request.value("task", std::string()) == "rubric") {
    LearningObjective obj;
    obj.text = text;
    const auto smart = check_smart(obj);
    std::optional<BloomLevel> declared;
    if (objective.contains("declared_level")) declared = parse_level(objective["declared_level"].get<std::string>());
    const int structural = std::min(5, 1 + abcd.present_count());
    const int measurable = smart.measurable ? 5 : 2;
    const int taxonomic = !declared ? 4 : (classified && *declared == *classified ? 5 : 3);
    const int clarity = smart.specific ? 4 : 3;
    const int technical = 4;
    json suggestions = json::array();
    if (!abcd.audience) suggestions.push_back("Name the audience, for example \"Students will ...\".");
    if (!abcd.behavior) suggestions.push_back("Replace the non-observable verb with an observable action verb.");
    if (!abcd.condition) suggestions.push_back("State the condition under which learners perform the behavior.");
    if (!abcd.degree) suggestions.push_back("Add a degree: the criterion for acceptable performance.");
    json verdict{{"structural", structural},
                 {"taxonomic", taxonomic},
                 {"measurable", measurable},
                 {"clarity", clarity},
                 {"technical", technical},
                 {"notes",
                  {{"structural", std::to_string(abcd.present_count()) + " of 4 ABCD parts present"},
                   {"taxonomic", classified ? "verb indicates " + std::string(to_string(*classified))
                                            : std::string("no taxonomy verb found")},
                   {"measurable", smart.measurable ? "observable behavior" : "behavior is not observable"},
                   {"clarity", smart.specific ? "behavior names its content" : "behavior lacks a concrete object"},
                   {"technical", "no technical issues detected"}}},
                 {"suggestions", suggestions}};
    return "Step 1: checked the ABCD parts. Step 2: checked verb alignment. Step 3: scored each criterion.\n```json\n" +
           verdict.dump(2) + "\n```\n";
  }

  std::string reasoning = "Step 1: the audience is " + abcd.audience.value_or(std::string("not stated")) +
                          " and the behavior is \"" + abcd.behavior.value_or(std::string("not observable")) + "\". ";
  if (classified) {
    reasoning += "Step 2: the operative verb \"" + abcd.behavior_lemma.value_or(std::string("?")) +
                 "\" asks for " + std::string(k_level_gloss[index(level)]) + ". ";
  } else {
    reasoning += "Step 2: no taxonomy action verb was found, so the level is uncertain. ";
  }
  reasoning += "Step 3: adjacent levels demand a different cognitive process. Step 4: the best fit is " +
               std::string(to_string(level)) + ".";
  return reasoning + "\n```json\n" + json{{"level", to_string(level)}, {"reasoning", reasoning}}.dump(2) + "\n```\n";
}

std::string assess_content(const ChatRequest& req, std::uint64_t h) {
  static constexpr std::array<std::string_view, 4> types = {"multiple-choice", "short-answer", "project-task",
                                                            "discussion-prompt"};
  const json request = first_block(req, false);
  const std::string text = request.value("objective", std::string());
  const std::string target = request.value("bloom_target", std::string("Understand"));
  const int count = request.value("count", 1);
  json items = json::array();
  for (int k = 0; k < count; ++k) {
    const auto type = types[(h + static_cast<std::uint64_t>(k)) % types.size()];
    std::string stem;
    if (type == "multiple-choice") stem = "Which of the following best demonstrates the objective: " + text + "?";
    else if (type == "short-answer") stem = "In a few sentences, respond to this task: " + text + ".";
    else if (type == "project-task") stem = "Complete a small project in which you show that you can meet this objective: " + text + ".";
    else stem = "Discuss with your peers how you would meet this objective: " + text + ".";
    items.push_back({{"item_type", type},
                     {"stem", stem},
                     {"answer_guide", "Full credit when the response meets the objective at the " + target +
                                          " level; partial credit for work at an adjacent level."},
                     {"bloom_target", target}});
  }
  return "```json\n" + json{{"items", items}}.dump(2) + "\n```\n";
}

}  // namespace

StubBackend::StubBackend(std::string model_default) : model_default_(std::move(model_default)) {}

std::uint64_t StubBackend::request_hash(const ChatRequest& request, std::string_view model) {
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.6f", request.temperature);
  std::uint64_t h = fnv1a64(model);
  h = fnv1a64(temp, h);
  for (const auto& m : request.messages) {
    h = fnv1a64(to_string(m.role), h);
    h = fnv1a64("\x1e", h);
    h = fnv1a64(m.content, h);
    h = fnv1a64("\x1f", h);
  }
  return h;
}

std::string StubBackend::content_for(const ChatRequest& request, std::string_view model) {
  const std::uint64_t h = request_hash(request, model);
  const std::string& system = request.messages.front().content;
  if (system.find(k_logs_marker) != std::string::npos) return logs_content(request, h);
  if (system.find(k_oae_marker) != std::string::npos) return oae_content(request);
  if (system.find(k_assess_marker) != std::string::npos) return assess_content(request, h);
  return "stub response " + hex64(h);
}

ChatResponse StubBackend::complete(const ChatRequest& request) {
  request.validate();
  const auto started = std::chrono::steady_clock::now();
  ChatResponse out;
  out.model = request.model.empty() ? model_default_ : request.model;
  out.content = content_for(request, out.model);
  std::size_t prompt_chars = 0;
  for (const auto& m : request.messages) prompt_chars += m.content.size();
  out.usage = {static_cast<int>((prompt_chars + 3) / 4), static_cast<int>((out.content.size() + 3) / 4)};
  out.backend = BackendKind::stub;
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace arched::llm
