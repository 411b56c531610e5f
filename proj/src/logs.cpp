#include "arched/logs.hpp"

#include "arched/error.hpp"
#include "arched/json_util.hpp"
#include "arched/log.hpp"
#include "arched/markers.hpp"
#include "arched/util.hpp"

#include <map>

namespace arched {

namespace {

using nlohmann::json;

std::string level_verbs_block() {
  std::string out;
  for (auto level : k_all_levels) {
    const auto verbs = verbs_for_level(level);
    out += "- " + std::string(to_string(level)) + ": ";
    for (std::size_t i = 0; i < verbs.size() && i < 12; ++i) out += (i ? ", " : "") + verbs[i];
    out += "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string system_prompt() {
  static const std::string text = render_template(
      template_text("logs_system_v1"),
      {{"level_verbs", level_verbs_block()}, {"schema", llm::describe(LogsEngine::output_schema()).dump(2)}});
  return text;
}

json request_payload(const GenerationSpec& spec, int variation) {
  json levels = json::array();
  for (auto l : spec.target_levels) levels.push_back(to_string(l));
  json j{{"grade_level", to_string(spec.grade_level)},
         {"subject", truncate_with_marker(spec.subject, k_free_text_limit)},
         {"topic", truncate_with_marker(spec.topic, k_free_text_limit)},
         {"target_levels", levels},
         {"count_per_level", spec.count_per_level}};
  if (spec.extra_context) j["extra_context"] = truncate_with_marker(*spec.extra_context, k_extra_context_limit);
  if (variation != 0) j["variation"] = variation;
  return j;
}

llm::ChatRequest make_request(std::string user, const GenerationOptions& options) {
  llm::ChatRequest req;
  req.model = options.model;
  req.temperature = options.temperature;
  req.max_tokens = 4096;
  req.messages = {{llm::Role::system, system_prompt()}, {llm::Role::user, std::move(user)}};
  return req;
}

}  // namespace

void to_json(json& j, const GenerationBatch& v) {
  j = json{{"spec", v.spec},
           {"objectives", v.objectives},
           {"prompt_fingerprint", v.prompt_fingerprint},
           {"created_at", v.created_at},
           {"audit_notes", v.audit_notes}};
}

void from_json(const json& j, GenerationBatch& v) {
  v.spec = jsonu::require(j, "spec").get<GenerationSpec>();
  v.objectives = jsonu::require(j, "objectives").get<std::vector<LearningObjective>>();
  v.prompt_fingerprint = jsonu::require_string(j, "prompt_fingerprint");
  v.created_at = jsonu::require_string(j, "created_at");
  v.audit_notes = j.value("audit_notes", std::vector<std::string>{});
}

std::string prompt_fingerprint(const llm::ChatRequest& request) {
  std::uint64_t h = fnv1a64(request.model);
  for (const auto& m : request.messages) {
    h = fnv1a64(llm::to_string(m.role), h);
    h = fnv1a64("\x1e", h);
    h = fnv1a64(m.content, h);
    h = fnv1a64("\x1f", h);
  }
  return hex64(h);
}

const llm::Schema& LogsEngine::output_schema() {
  using llm::Schema;
  static const Schema schema = [] {
    std::vector<std::string> names;
    for (auto l : k_all_levels) names.emplace_back(to_string(l));
    // `level` is free text here: out-of-taxonomy levels are filtered and
    // audited by generate() rather than bounced back to the model.
    return Schema::object({{"objectives",
                            Schema::array(Schema::object({{"text", Schema::string(true)},
                                                          {"level", Schema::string(true)},
                                                          {"rationale", Schema::string()}}))}});
  }();
  return schema;
}

LogsEngine::LogsEngine(llm::Gateway& gateway, Clock clock) : gateway_(gateway), clock_(std::move(clock)) {}

llm::ChatRequest LogsEngine::build_generation_prompt(const GenerationSpec& spec, const GenerationOptions& options) const {
  spec.validate();
  const std::string user = render_template(template_text("logs_user_v1"),
                                           {{"request_json", request_payload(spec, options.variation).dump(2)},
                                            {"regeneration", ""}});
  return make_request(user, options);
}

llm::ChatRequest LogsEngine::build_regeneration_prompt(const GenerationSpec& spec,
                                                       const std::vector<LearningObjective>& kept,
                                                       const std::string& feedback,
                                                       const GenerationOptions& options) const {
  spec.validate();
  json payload = request_payload(spec, options.variation);
  json kept_json = json::array();
  for (const auto& o : kept) {
    if (kept_json.size() >= k_kept_exemplar_limit) break;
    json k{{"text", truncate_with_marker(o.text, 200)}};
    if (o.bloom_declared) k["level"] = to_string(*o.bloom_declared);
    kept_json.push_back(std::move(k));
  }
  payload["kept"] = kept_json;
  const std::string revision = render_template(
      template_text("logs_regenerate_v1"), {{"feedback", truncate_with_marker(feedback, k_feedback_limit)}});
  const std::string user = render_template(template_text("logs_user_v1"),
                                           {{"request_json", payload.dump(2)}, {"regeneration", revision}});
  return make_request(user, options);
}

GenerationBatch LogsEngine::run(const GenerationSpec& spec, llm::ChatRequest request,
                                const GenerationOptions& options) const {
  GenerationBatch batch;
  batch.spec = spec;
  batch.prompt_fingerprint = prompt_fingerprint(request);
  batch.created_at = format_timestamp(clock_());

  std::map<BloomLevel, int> produced;
  int ordinal = 0;
  const auto absorb = [&](const json& value) {
    for (const auto& item : value.at("objectives")) {
      const std::string text = item.at("text").get<std::string>();
      const std::string level_name = item.at("level").get<std::string>();
      const auto level = parse_level(level_name);
      if (!level || !spec.target_levels.contains(*level)) {
        batch.audit_notes.push_back("dropped item with level '" + level_name + "' outside the requested levels: " +
                                    truncate_with_marker(text, 120));
        continue;
      }
      if (produced[*level] >= spec.count_per_level) {
        batch.audit_notes.push_back("dropped surplus " + level_name + " item: " + truncate_with_marker(text, 120));
        continue;
      }
      if (text.find_first_of("\r\n") != std::string::npos) {
        batch.audit_notes.push_back("dropped multi-line item: " + truncate_with_marker(text, 120));
        continue;
      }
      const std::string rationale = trim(item.value("rationale", std::string()));
      LearningObjective obj;
      obj.id = "obj-" + hex64(fnv1a64(options.id_salt + "\x1f" + batch.prompt_fingerprint + "\x1f" +
                                      std::to_string(ordinal++) + "\x1f" + text))
                            .substr(0, 12);
      obj.text = text;
      obj.subject = spec.subject;
      obj.grade_level = spec.grade_level;
      obj.bloom_declared = *level;
      obj.provenance = Provenance::generated;
      obj.curation = Curation::pending;
      obj.rationale = rationale.empty()
                          ? "Targets the " + level_name + " level as requested by the educator."
                          : rationale;
      obj.abcd = decompose_abcd(text).parts();
      batch.objectives.push_back(std::move(obj));
      ++produced[*level];
    }
  };

  absorb(llm::complete_structured(gateway_, request, output_schema()).value);

  // At most one top-up call for a shortfall.
  json shortfall = json::object();
  for (auto level : spec.target_levels) {
    const int missing = spec.count_per_level - produced[level];
    if (missing > 0) shortfall[std::string(to_string(level))] = missing;
  }
  if (!shortfall.empty()) {
    batch.audit_notes.push_back("requested one top-up call for shortfall " + shortfall.dump());
    request.messages.push_back(
        {llm::Role::user, render_template(template_text("logs_topup_v1"),
                                          {{"shortfall_json", json{{"shortfall", shortfall}}.dump(2)}})});
    try {
      absorb(llm::complete_structured(gateway_, request, output_schema()).value);
    } catch (const Error& e) {
      batch.audit_notes.push_back(std::string("top-up call failed: ") + e.what());
    }
  }

  if (batch.objectives.empty()) {
    throw Error(ErrorCode::generation_empty,
                "the model returned no usable objectives; retry or adjust the parameters",
                {{"audit_notes", batch.audit_notes}});
  }
  log::info("logs generated " + std::to_string(batch.objectives.size()) + " objectives, prompt " +
            batch.prompt_fingerprint);
  return batch;
}

GenerationBatch LogsEngine::generate(const GenerationSpec& spec, const GenerationOptions& options) const {
  return run(spec, build_generation_prompt(spec, options), options);
}

GenerationBatch LogsEngine::regenerate(const GenerationBatch& batch, const std::string& feedback,
                                       const std::set<std::string>& keep, const GenerationOptions& options) const {
  std::vector<LearningObjective> kept;
  for (const auto& id : keep) {
    const auto it = std::find_if(batch.objectives.begin(), batch.objectives.end(),
                                 [&](const LearningObjective& o) { return o.id == id; });
    if (it == batch.objectives.end()) {
      throw Error(ErrorCode::unknown_objective, "keep refers to unknown objective id '" + id + "'", {{"id", id}});
    }
  }
  for (const auto& o : batch.objectives) {
    if (keep.contains(o.id)) kept.push_back(o);
  }
  GenerationBatch fresh = run(batch.spec, build_regeneration_prompt(batch.spec, kept, feedback, options), options);
  GenerationBatch result;
  result.spec = fresh.spec;
  result.prompt_fingerprint = fresh.prompt_fingerprint;
  result.created_at = fresh.created_at;
  result.audit_notes = std::move(fresh.audit_notes);
  result.objectives = kept;
  for (auto& o : fresh.objectives) result.objectives.push_back(std::move(o));
  return result;
}

}  // namespace arched
