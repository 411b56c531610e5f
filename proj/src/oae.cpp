#include "arched/oae.hpp"

#include "arched/error.hpp"
#include "arched/json_util.hpp"
#include "arched/log.hpp"
#include "arched/util.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

namespace arched {

namespace {

using nlohmann::json;

json objective_payload(const LearningObjective& obj) {
  json o{{"id", obj.id}, {"text", obj.text}};
  if (obj.bloom_declared) o["declared_level"] = to_string(*obj.bloom_declared);
  if (obj.subject) o["subject"] = *obj.subject;
  return o;
}

const llm::Schema& classify_schema() {
  using llm::Schema;
  static const Schema s = [] {
    std::vector<std::string> names;
    for (auto l : k_all_levels) names.emplace_back(to_string(l));
    return Schema::object({{"level", Schema::enumeration(names)}, {"reasoning", Schema::string(true)}});
  }();
  return s;
}

const llm::Schema& rubric_schema() {
  using llm::Schema;
  static const Schema s = [] {
    std::vector<Schema::Field> fields;
    std::vector<Schema::Field> notes;
    for (auto c : k_all_criteria) {
      // The 1..5 range is stated in the prompt; out-of-range integers are clamped, not rejected.
      fields.push_back({std::string(key_of(c)), Schema::integer()});
      notes.push_back({std::string(key_of(c)), Schema::string(), false});
    }
    fields.push_back({"notes", Schema::object(notes), false});
    fields.push_back({"suggestions", Schema::array(Schema::string()), false});
    return Schema::object(fields);
  }();
  return s;
}

std::vector<std::string> rule_suggestions(const AbcdReport& abcd, const SmartChecklist& smart,
                                          const std::optional<BloomLevel>& declared,
                                          const std::optional<BloomLevel>& rule_level) {
  std::vector<std::string> out;
  if (!abcd.behavior) out.emplace_back("Replace the non-observable verb with an observable action verb.");
  if (!abcd.audience) out.emplace_back("Name the audience, for example \"Students will ...\".");
  if (!abcd.condition) out.emplace_back("State the condition under which learners perform the behavior.");
  if (!abcd.degree) out.emplace_back("Add a degree: the criterion for acceptable performance.");
  if (abcd.behavior && !smart.specific) out.emplace_back("Name the specific content the behavior acts on.");
  if (declared && rule_level && *declared != *rule_level) {
    out.push_back("The verb suggests " + std::string(to_string(*rule_level)) + " while the declared level is " +
                  std::string(to_string(*declared)) + "; align the verb with the intended level.");
  }
  return out;
}

}  // namespace

std::string_view key_of(Criterion c) {
  static constexpr std::array<std::string_view, 5> keys = {"structural", "taxonomic", "measurable", "clarity",
                                                           "technical"};
  return keys.at(static_cast<int>(c));
}

std::string_view label_of(Criterion c) {
  static constexpr std::array<std::string_view, 5> labels = {"Structural", "Taxonomic", "Measurable", "Clarity",
                                                             "Technical"};
  return labels.at(static_cast<int>(c));
}

int RubricScores::get(Criterion c) const {
  switch (c) {
    case Criterion::structural: return structural;
    case Criterion::taxonomic: return taxonomic;
    case Criterion::measurable: return measurable;
    case Criterion::clarity: return clarity;
    case Criterion::technical: return technical;
  }
  return 0;
}

void RubricScores::set(Criterion c, int value) {
  switch (c) {
    case Criterion::structural: structural = value; break;
    case Criterion::taxonomic: taxonomic = value; break;
    case Criterion::measurable: measurable = value; break;
    case Criterion::clarity: clarity = value; break;
    case Criterion::technical: technical = value; break;
  }
}

std::string_view to_string(AssessedVia v) { return v == AssessedVia::llm ? "llm" : "rule-fallback"; }

std::string format_mean_sd(double mean, double sd) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f±%.1f", mean, sd);
  return buf;
}

CriterionSummary summarize(const std::vector<double>& values) {
  CriterionSummary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

RubricScores rule_rubric(const LearningObjective& obj) {
  validate_objective_text(obj.text);
  const auto abcd = decompose_abcd(obj.text);
  const auto smart = check_smart(obj);
  const auto rule_level = classify_by_verb(obj.text);
  RubricScores r;
  r.structural = std::min(5, 1 + abcd.present_count());
  r.measurable = smart.measurable ? 5 : 2;
  r.taxonomic = (obj.bloom_declared && rule_level && *obj.bloom_declared == *rule_level) ? 5 : 3;
  r.clarity = 3;
  r.technical = 3;
  r.rule_fallback = true;
  for (auto c : k_all_criteria) r.notes[std::string(key_of(c))] = "rule-fallback";
  r.notes["structural"] = "rule-fallback: " + std::to_string(abcd.present_count()) + " of 4 ABCD parts present";
  return r;
}

OaeEngine::OaeEngine(llm::Gateway& gateway, Clock clock, OaeOptions options)
    : gateway_(gateway), clock_(std::move(clock)), options_(std::move(options)) {}

llm::ChatRequest OaeEngine::build_classify_prompt(const LearningObjective& obj) const {
  llm::ChatRequest req;
  req.model = options_.model;
  req.temperature = options_.temperature;
  req.messages = {
      {llm::Role::system, render_template(template_text("oae_classify_system_v1"),
                                          {{"schema", llm::describe(classify_schema()).dump(2)}})},
      {llm::Role::user, render_template(template_text("oae_user_v1"),
                                        {{"request_json", json{{"task", "classify"}, {"objective", objective_payload(obj)}}.dump(2)}})}};
  return req;
}

llm::ChatRequest OaeEngine::build_rubric_prompt(const LearningObjective& obj) const {
  const auto abcd = decompose_abcd(obj.text);
  const auto smart = check_smart(obj);
  const auto rule_level = classify_by_verb(obj.text);
  json evidence{{"abcd",
                 {{"audience", abcd.audience ? json(*abcd.audience) : json(nullptr)},
                  {"behavior", abcd.behavior ? json(*abcd.behavior) : json(nullptr)},
                  {"condition", abcd.condition ? json(*abcd.condition) : json(nullptr)},
                  {"degree", abcd.degree ? json(*abcd.degree) : json(nullptr)},
                  {"failure", abcd.failure ? json(*abcd.failure) : json(nullptr)}}},
                {"smart",
                 {{"specific", smart.specific},
                  {"measurable", smart.measurable},
                  {"time_bound", smart.time_bound},
                  {"achievable", "delegated"},
                  {"relevant", "delegated"}}},
                {"verb_level", rule_level ? json(to_string(*rule_level)) : json("Unclassified")}};
  llm::ChatRequest req;
  req.model = options_.model;
  req.temperature = options_.temperature;
  req.messages = {
      {llm::Role::system, render_template(template_text("oae_rubric_system_v1"),
                                          {{"schema", llm::describe(rubric_schema()).dump(2)}})},
      {llm::Role::user,
       render_template(template_text("oae_user_v1"),
                       {{"request_json",
                         json{{"task", "rubric"}, {"objective", objective_payload(obj)}, {"evidence", evidence}}.dump(2)}})}};
  return req;
}

LevelVerdict OaeEngine::classify_level(const LearningObjective& obj) const {
  validate_objective_text(obj.text);
  try {
    const auto result = llm::complete_structured(gateway_, build_classify_prompt(obj), classify_schema());
    LevelVerdict v;
    v.level = *parse_level(result.value.at("level").get<std::string>());
    v.reasoning = trim(result.value.at("reasoning").get<std::string>());
    v.via = AssessedVia::llm;
    return v;
  } catch (const Error& e) {
    log::warn(std::string("oae classify falling back to verb rules: ") + to_string(e.code()).data());
  }
  LevelVerdict v;
  v.via = AssessedVia::rule_fallback;
  const auto rule_level = classify_by_verb(obj.text);
  if (rule_level) {
    v.level = *rule_level;
    v.reasoning = "Rule fallback: the first taxonomy verb in the objective maps to " +
                  std::string(to_string(*rule_level)) + ".";
  } else {
    v.level = BloomLevel::Understand;
    v.low_confidence = true;
    v.reasoning = "Rule fallback: no taxonomy verb found; defaulting to Understand with low confidence.";
  }
  return v;
}

std::pair<RubricScores, std::vector<std::string>> OaeEngine::score_with_suggestions(const LearningObjective& obj) const {
  validate_objective_text(obj.text);
  const auto abcd = decompose_abcd(obj.text);
  const auto smart = check_smart(obj);
  auto suggestions = rule_suggestions(abcd, smart, obj.bloom_declared, classify_by_verb(obj.text));
  RubricScores scores;
  try {
    const auto result = llm::complete_structured(gateway_, build_rubric_prompt(obj), rubric_schema());
    for (auto c : k_all_criteria) {
      const auto& v = result.value.at(std::string(key_of(c)));
      const long long raw = v.is_number_integer() ? v.get<long long>() : static_cast<long long>(v.get<double>());
      scores.set(c, static_cast<int>(std::clamp<long long>(raw, 1, 5)));
    }
    if (result.value.contains("notes") && result.value["notes"].is_object()) {
      for (const auto& [k, v] : result.value["notes"].items()) {
        if (v.is_string()) scores.notes[k] = v.get<std::string>();
      }
    }
    if (result.value.contains("suggestions")) {
      for (const auto& s : result.value["suggestions"]) {
        const auto text = s.get<std::string>();
        if (std::find(suggestions.begin(), suggestions.end(), text) == suggestions.end()) suggestions.push_back(text);
      }
    }
  } catch (const Error& e) {
    log::warn(std::string("oae rubric falling back to rules: ") + to_string(e.code()).data());
    scores = rule_rubric(obj);
  }
  if (!abcd.behavior && scores.structural > 2) {
    scores.structural = 2;
    scores.notes["structural"] += " (capped at 2: no observable behavior)";
  }
  return {scores, suggestions};
}

RubricScores OaeEngine::score_rubric(const LearningObjective& obj) const { return score_with_suggestions(obj).first; }

ObjectiveAnalysis OaeEngine::analyze(const LearningObjective& obj) const {
  const auto verdict = classify_level(obj);
  auto [rubric, suggestions] = score_with_suggestions(obj);
  ObjectiveAnalysis a;
  a.objective_id = obj.id;
  a.text = obj.text;
  a.assessed_level = verdict.level;
  a.assessed_via = verdict.via;
  a.low_confidence = verdict.low_confidence;
  if (obj.bloom_declared) a.level_agrees_with_declared = *obj.bloom_declared == verdict.level;
  a.rubric = std::move(rubric);
  a.reasoning = verdict.reasoning;
  a.improvement_suggestions = std::move(suggestions);
  return a;
}

AnalysisReport assemble_report(std::string set_id, std::vector<ObjectiveAnalysis> analyses, std::string created_at) {
  AnalysisReport r;
  r.set_id = std::move(set_id);
  r.created_at = std::move(created_at);
  r.analyses = std::move(analyses);
  for (const auto& a : r.analyses) ++r.distribution[index(a.assessed_level)];
  for (auto l : k_all_levels) {
    if (r.distribution[index(l)] == 0) r.gaps.push_back(l);
  }
  for (auto c : k_all_criteria) {
    std::vector<double> values;
    for (const auto& a : r.analyses) values.push_back(a.rubric.get(c));
    r.summary[std::string(key_of(c))] = summarize(values);
  }
  return r;
}

AnalysisReport OaeEngine::analyze_set(const ObjectiveSet& set) const {
  if (set.objectives.empty()) throw Error(ErrorCode::invalid_input, "cannot analyze an empty objective set");
  for (const auto& o : set.objectives) validate_objective_text(o.text);
  const std::size_t n = set.objectives.size();
  std::vector<ObjectiveAnalysis> analyses(n);
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, gateway_.config().max_in_flight)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) analyses[i] = analyze(set.objectives[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) analyses[i] = analyze(set.objectives[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return assemble_report(set.id, std::move(analyses), format_timestamp(clock_()));
}

// --- JSON -------------------------------------------------------------------

void to_json(json& j, const RubricScores& v) {
  j = json::object();
  for (auto c : k_all_criteria) j[std::string(key_of(c))] = v.get(c);
  j["notes"] = v.notes;
  j["rule_fallback"] = v.rule_fallback;
}

void from_json(const json& j, RubricScores& v) {
  for (auto c : k_all_criteria) v.set(c, jsonu::require(j, std::string(key_of(c)).c_str()).get<int>());
  v.notes = j.value("notes", std::map<std::string, std::string>{});
  v.rule_fallback = j.value("rule_fallback", false);
}

void to_json(json& j, const ObjectiveAnalysis& v) {
  j = json{{"objective_id", v.objective_id},
           {"text", v.text},
           {"assessed_level", to_string(v.assessed_level)},
           {"assessed_via", to_string(v.assessed_via)},
           {"low_confidence", v.low_confidence},
           {"level_agrees_with_declared",
            v.level_agrees_with_declared ? json(*v.level_agrees_with_declared) : json("not-applicable")},
           {"rubric", v.rubric},
           {"reasoning", v.reasoning},
           {"improvement_suggestions", v.improvement_suggestions}};
}

void from_json(const json& j, ObjectiveAnalysis& v) {
  v.objective_id = jsonu::require_string(j, "objective_id");
  v.text = jsonu::require_string(j, "text");
  const auto level = parse_level(jsonu::require_string(j, "assessed_level"));
  if (!level) throw Error(ErrorCode::bad_request, "unknown assessed_level");
  v.assessed_level = *level;
  v.assessed_via = jsonu::require_string(j, "assessed_via") == "llm" ? AssessedVia::llm : AssessedVia::rule_fallback;
  v.low_confidence = j.value("low_confidence", false);
  const auto& agree = jsonu::require(j, "level_agrees_with_declared");
  v.level_agrees_with_declared = agree.is_boolean() ? std::optional<bool>(agree.get<bool>()) : std::nullopt;
  v.rubric = jsonu::require(j, "rubric").get<RubricScores>();
  v.reasoning = jsonu::require_string(j, "reasoning");
  v.improvement_suggestions = j.value("improvement_suggestions", std::vector<std::string>{});
}

void to_json(json& j, const AnalysisReport& v) {
  json dist = json::object();
  for (auto l : k_all_levels) dist[std::string(to_string(l))] = v.distribution[index(l)];
  json gaps = json::array();
  for (auto l : v.gaps) gaps.push_back(to_string(l));
  json summary = json::object();
  for (const auto& [k, s] : v.summary) {
    summary[k] = {{"mean", s.mean}, {"sd", s.sd}, {"formatted", format_mean_sd(s.mean, s.sd)}};
  }
  j = json{{"set_id", v.set_id},     {"analyses", v.analyses}, {"distribution", dist},
           {"gaps", gaps},           {"summary", summary},     {"created_at", v.created_at}};
}

void from_json(const json& j, AnalysisReport& v) {
  v.set_id = jsonu::require_string(j, "set_id");
  v.analyses = jsonu::require(j, "analyses").get<std::vector<ObjectiveAnalysis>>();
  const auto& dist = jsonu::require(j, "distribution");
  for (auto l : k_all_levels) v.distribution[index(l)] = dist.at(std::string(to_string(l))).get<int>();
  v.gaps.clear();
  for (const auto& g : jsonu::require(j, "gaps")) {
    const auto l = parse_level(g.get<std::string>());
    if (!l) throw Error(ErrorCode::bad_request, "unknown level in gaps");
    v.gaps.push_back(*l);
  }
  v.summary.clear();
  for (const auto& [k, s] : jsonu::require(j, "summary").items()) {
    v.summary[k] = CriterionSummary{s.at("mean").get<double>(), s.at("sd").get<double>()};
  }
  v.created_at = jsonu::require_string(j, "created_at");
}

std::optional<ReportFormat> parse_report_format(std::string_view s) {
  const auto lowered = to_lower(trim(s));
  if (lowered == "json") return ReportFormat::json;
  if (lowered == "markdown" || lowered == "md") return ReportFormat::markdown;
  return std::nullopt;
}

namespace {

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_report(const AnalysisReport& report, ReportFormat format) {
  if (format == ReportFormat::json) return json(report).dump() + "\n";

  std::string md;
  md += "# Objective analysis report\n\n";
  md += "- Set: " + report.set_id + "\n";
  md += "- Generated: " + report.created_at + "\n";
  md += "- Objectives analyzed: " + std::to_string(report.analyses.size()) + "\n\n";

  md += "## Bloom level distribution\n\n| Level | Count |\n|---|---|\n";
  for (auto l : k_all_levels) {
    md += "| " + std::string(to_string(l)) + " | " + std::to_string(report.distribution[index(l)]) + " |\n";
  }
  md += "\n";
  if (report.gaps.empty()) {
    md += "Coverage gaps: none\n\n";
  } else {
    md += "Coverage gaps:";
    for (std::size_t i = 0; i < report.gaps.size(); ++i) md += (i ? ", " : " ") + std::string(to_string(report.gaps[i]));
    md += "\n\n";
  }

  md += "## Objectives\n\n";
  for (const auto& a : report.analyses) {
    md += "### " + a.objective_id + "\n\n";
    md += "> " + md_cell(a.text) + "\n\n";
    md += "- Assessed level: " + std::string(to_string(a.assessed_level)) + " (via " +
          std::string(to_string(a.assessed_via)) + (a.low_confidence ? ", low confidence" : "") + ")\n";
    md += "- Matches declared level: " +
          std::string(a.level_agrees_with_declared ? (*a.level_agrees_with_declared ? "yes" : "no") : "not applicable") +
          "\n\n";
    md += "| Criterion | Score | Note |\n|---|---|---|\n";
    for (auto c : k_all_criteria) {
      const auto note = a.rubric.notes.find(std::string(key_of(c)));
      md += "| " + std::string(label_of(c)) + " | " + std::to_string(a.rubric.get(c)) + " | " +
            md_cell(note == a.rubric.notes.end() ? "" : note->second) + " |\n";
    }
    md += "\nReasoning: " + md_cell(a.reasoning) + "\n\n";
    if (!a.improvement_suggestions.empty()) {
      md += "Suggestions:\n";
      for (const auto& s : a.improvement_suggestions) md += "- " + md_cell(s) + "\n";
      md += "\n";
    }
  }

  md += "## Summary\n\n| Criterion | Score (mean±SD) |\n|---|---|\n";
  for (auto c : k_all_criteria) {
    const auto it = report.summary.find(std::string(key_of(c)));
    const auto s = it == report.summary.end() ? CriterionSummary{} : it->second;
    md += "| " + std::string(label_of(c)) + " | " + format_mean_sd(s.mean, s.sd) + " |\n";
  }
  return md;
}

}  // namespace arched
