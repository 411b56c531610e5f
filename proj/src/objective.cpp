#include "arched/objective.hpp"

#include "arched/csv.hpp"
#include "arched/error.hpp"
#include "arched/json_util.hpp"
#include "arched/util.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <regex>
#include <unordered_set>

namespace arched {

namespace {

constexpr std::array<std::string_view, 3> k_provenance = {"generated", "imported", "human-authored"};
constexpr std::array<std::string_view, 3> k_curation = {"pending", "selected", "rejected"};
constexpr std::array<std::string_view, 7> k_grades = {
    "primary", "middle", "secondary", "undergraduate-intro", "undergraduate-advanced",
    "graduate", "professional"};

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(const std::array<std::string_view, N>& names, std::string_view s) {
  const std::string lowered = to_lower(trim(s));
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == lowered) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool contains(std::size_t pos) const { return pos >= begin && pos < end; }
};

std::string regex_escape(std::string_view s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string alternation(const std::vector<std::string>& terms) {
  std::vector<std::string> sorted = terms;
  // Longest first so "the learner" wins over "learner".
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::string out;
  for (const auto& t : sorted) {
    if (!out.empty()) out.push_back('|');
    out += regex_escape(t);
  }
  return out;
}

// Strips trailing separators so spans read naturally.
Span tidy(std::string_view text, Span s) {
  while (s.end > s.begin && std::string_view(" \t,;:.").find(text[s.end - 1]) != std::string_view::npos) --s.end;
  while (s.begin < s.end && (text[s.begin] == ' ' || text[s.begin] == '\t')) ++s.begin;
  return s;
}

std::optional<Span> first_match(const std::string& text, const std::vector<std::regex>& patterns,
                                std::size_t group = 0) {
  std::optional<Span> best;
  for (const auto& re : patterns) {
    std::smatch m;
    if (std::regex_search(text, m, re)) {
      const auto b = static_cast<std::size_t>(m.position(group));
      if (!best || b < best->begin) best = Span{b, b + static_cast<std::size_t>(m.length(group))};
    }
  }
  return best;
}

const std::vector<std::regex>& degree_patterns() {
  static const std::vector<std::regex> patterns = [] {
    const auto flags = std::regex::ECMAScript | std::regex::icase;
    return std::vector<std::regex>{
        std::regex(R"(\bwith at least [^,;]*)", flags),
        std::regex(R"(\bwithin [^,;]*)", flags),
        std::regex(R"(\b(with )?\d+(\.\d+)?\s*% accuracy[^,;]*)", flags),
        std::regex(R"(\bcorrectly \w+ \d+ (of|out of) \d+[^,;]*)", flags),
        std::regex(R"(\bno more than [^,;]*)", flags),
        std::regex(R"(\bwith no errors[^,;]*)", flags),
        std::regex(R"(\bby the end of [^,;]*)", flags),
    };
  }();
  return patterns;
}

const std::regex& time_pattern() {
  static const std::regex re(
      R"(\b(within|by the end of|minutes?|hours?|days?|weeks?|months?|semesters?|terms?|course|module|unit|lesson|session|class period|deadline)\b)",
      std::regex::ECMAScript | std::regex::icase);
  return re;
}

const std::unordered_set<std::string_view>& stopwords() {
  static const std::unordered_set<std::string_view> words = {
      "a",   "an",  "the", "of",  "to",   "in",   "on",   "for",  "and", "or",  "at",
      "by",  "as",  "is",  "be",  "it",   "its",  "their", "them", "they", "this", "that",
      "these", "those", "with", "from", "into", "about", "how", "what", "why", "all",
      "some", "any", "each", "two", "three", "four", "five", "one"};
  return words;
}

void check_objective_fields(const LearningObjective& o) { validate_objective_text(o.text); }

}  // namespace

std::string_view to_string(Provenance p) { return k_provenance.at(static_cast<int>(p)); }
std::string_view to_string(Curation c) { return k_curation.at(static_cast<int>(c)); }
std::string_view to_string(GradeLevel g) { return k_grades.at(static_cast<int>(g)); }
std::optional<Provenance> parse_provenance(std::string_view s) { return parse_enum<Provenance>(k_provenance, s); }
std::optional<Curation> parse_curation(std::string_view s) { return parse_enum<Curation>(k_curation, s); }
std::optional<GradeLevel> parse_grade_level(std::string_view s) { return parse_enum<GradeLevel>(k_grades, s); }

bool curation_transition_allowed([[maybe_unused]] Curation from, Curation to) {
  return to != Curation::pending;
}

int AbcdParts::present_count() const {
  return 1 + (audience ? 1 : 0) + (condition ? 1 : 0) + (degree ? 1 : 0);
}

void validate_objective_text(std::string_view text) {
  if (trim(text).empty()) throw Error(ErrorCode::invalid_input, "text must be non-empty");
  if (text.find_first_of("\r\n") != std::string_view::npos) {
    throw Error(ErrorCode::invalid_input, "text must hold a single objective statement");
  }
}

void GenerationSpec::validate() const {
  if (trim(subject).empty()) throw Error(ErrorCode::invalid_input, "subject must be non-empty");
  if (trim(topic).empty()) throw Error(ErrorCode::invalid_input, "topic must be non-empty");
  if (target_levels.empty()) throw Error(ErrorCode::invalid_input, "target_levels must be non-empty");
  if (count_per_level < 1) throw Error(ErrorCode::invalid_input, "count_per_level must be >= 1");
  if (count_per_level * static_cast<int>(target_levels.size()) > k_max_objectives_per_request) {
    throw Error(ErrorCode::invalid_input,
                "count_per_level x |target_levels| must not exceed " +
                    std::to_string(k_max_objectives_per_request));
  }
}

// --- ABCD / SMART -------------------------------------------------------

const AbcdRules& AbcdRules::defaults() {
  static const AbcdRules rules;
  return rules;
}

int AbcdReport::present_count() const {
  return (audience ? 1 : 0) + (behavior ? 1 : 0) + (condition ? 1 : 0) + (degree ? 1 : 0);
}

std::optional<AbcdParts> AbcdReport::parts() const {
  if (!behavior) return std::nullopt;
  return AbcdParts{audience, *behavior, condition, degree};
}

bool is_deny_verb(std::string_view lemma, const AbcdRules& rules) {
  return std::find(rules.deny_verbs.begin(), rules.deny_verbs.end(), lemma) != rules.deny_verbs.end();
}

namespace {

struct RulePatterns {
  std::regex condition;
  std::regex audience;

  explicit RulePatterns(const AbcdRules& rules)
      : condition("(^|[,;]\\s*|\\s)((" + alternation(rules.condition_openers) + ")\\b[^,;]*)",
                  std::regex::ECMAScript | std::regex::icase),
        audience("\\b(" + alternation(rules.audience_terms) + ")\\b", std::regex::ECMAScript | std::regex::icase) {}
};

}  // namespace

AbcdReport decompose_abcd(std::string_view text_view, const VerbLexicon& lexicon, const AbcdRules& rules) {
  if (trim(text_view).empty()) throw Error(ErrorCode::invalid_input, "objective text must be non-empty");
  const std::string text(text_view);
  AbcdReport report;

  static const RulePatterns default_patterns(AbcdRules::defaults());
  std::optional<RulePatterns> custom;
  if (&rules != &AbcdRules::defaults()) custom.emplace(rules);
  const RulePatterns& patterns = custom ? *custom : default_patterns;
  const std::regex& condition_re = patterns.condition;
  const std::regex& audience_re = patterns.audience;

  std::optional<Span> degree = first_match(text, degree_patterns());

  std::optional<Span> condition = first_match(text, {condition_re}, 2);
  if (condition && degree) {
    if (condition->contains(degree->begin)) condition->end = degree->begin;
    if (degree->contains(condition->begin)) condition.reset();
  }
  if (condition) condition = tidy(text, *condition);
  if (condition && condition->end <= condition->begin) condition.reset();
  if (degree) degree = tidy(text, *degree);

  const auto inside_other = [&](std::size_t pos) {
    return (condition && condition->contains(pos)) || (degree && degree->contains(pos));
  };

  std::optional<Span> audience;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), audience_re); it != std::sregex_iterator(); ++it) {
    const auto b = static_cast<std::size_t>(it->position(1));
    if (inside_other(b)) continue;
    audience = Span{b, b + static_cast<std::size_t>(it->length(1))};
    break;
  }

  const std::size_t search_from = audience ? audience->end : 0;
  const auto tokens = tokenize(text);
  std::optional<Span> behavior;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    if (tok.begin < search_from || inside_other(tok.begin)) continue;
    if (tok.word == "be" && i + 1 < tokens.size() && tokens[i + 1].word == "aware") {
      report.behavior_lemma = "be aware";
      report.failure = std::string(k_no_observable_behavior);
      break;
    }
    const auto lemma = lemmatize_if(tok.word, [&](const std::string& c) {
      return lexicon.contains(c) || is_deny_verb(c, rules);
    });
    if (!lemma) continue;
    report.behavior_lemma = *lemma;
    if (is_deny_verb(*lemma, rules)) {
      report.failure = std::string(k_no_observable_behavior);
      break;
    }
    std::size_t end = text.size();
    for (const auto& other : {condition, degree}) {
      if (other && other->begin > tok.begin) end = std::min(end, other->begin);
    }
    behavior = tidy(text, Span{tok.begin, end});
    break;
  }
  if (!behavior && !report.failure) report.failure = std::string(k_no_observable_behavior);

  const auto cut = [&](const std::optional<Span>& s) -> std::optional<std::string> {
    if (!s) return std::nullopt;
    return text.substr(s->begin, s->end - s->begin);
  };
  report.audience = cut(audience);
  report.behavior = cut(behavior);
  report.condition = cut(condition);
  report.degree = cut(degree);
  return report;
}

int SmartChecklist::score() const {
  return int(specific) + int(measurable) + int(achievable) + int(relevant) + int(time_bound);
}

SmartChecklist check_smart(const LearningObjective& obj, const VerbLexicon& lexicon, const AbcdRules& rules) {
  validate_objective_text(obj.text);
  const AbcdReport abcd = decompose_abcd(obj.text, lexicon, rules);
  SmartChecklist out;
  if (abcd.behavior) {
    const auto toks = tokenize(*abcd.behavior);
    out.specific = std::any_of(toks.begin() + (toks.empty() ? 0 : 1), toks.end(), [](const Token& t) {
      return t.word.size() >= 3 && !stopwords().contains(t.word);
    });
  }
  out.measurable = abcd.behavior.has_value() && abcd.behavior_lemma &&
                   !is_deny_verb(*abcd.behavior_lemma, rules) && lexicon.contains(*abcd.behavior_lemma);
  const std::string bounds = abcd.degree.value_or("") + " " + abcd.condition.value_or("");
  out.time_bound = std::regex_search(bounds, time_pattern());
  return out;
}

// --- import / export ------------------------------------------------------

std::optional<SetFormat> parse_set_format(std::string_view s) {
  const auto lowered = to_lower(trim(s));
  if (lowered == "csv") return SetFormat::csv;
  if (lowered == "json") return SetFormat::json;
  return std::nullopt;
}

const std::vector<std::string>& objective_csv_columns() {
  static const std::vector<std::string> cols = {"id",        "text",           "subject",
                                                "grade_level", "declared_level", "assessed_level",
                                                "provenance",  "curation",       "rationale"};
  return cols;
}

namespace {

// One imported record, keyed by column name; absent keys are absent fields.
using Record = std::map<std::string, std::string>;

[[noreturn]] void fail_row(const std::string& where, const std::string& message) {
  throw Error(ErrorCode::import_malformed, where + ": " + message, {{"where", where}});
}

LearningObjective objective_from_record(const Record& rec, const std::string& where,
                                        const std::string& source, std::size_t ordinal) {
  LearningObjective o;
  o.provenance = Provenance::imported;
  o.curation = Curation::pending;
  const auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = rec.find(key);
    if (it == rec.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  const auto text = get("text");
  if (!text || trim(*text).empty()) fail_row(where, "text must be non-empty");
  if (text->find_first_of("\r\n") != std::string::npos) fail_row(where, "text must be a single statement");
  o.text = *text;
  o.id = get("id").value_or("obj-" + hex64(fnv1a64(source + "\x1f" + std::to_string(ordinal) + "\x1f" + o.text)).substr(0, 12));
  o.subject = get("subject");
  if (const auto g = get("grade_level")) {
    o.grade_level = parse_grade_level(*g);
    if (!o.grade_level) fail_row(where, "grade_level '" + *g + "' is not a known grade level");
  }
  if (const auto l = get("declared_level")) {
    o.bloom_declared = parse_level(*l);
    if (!o.bloom_declared) fail_row(where, "declared_level '" + *l + "' is not a Bloom level");
  }
  if (const auto l = get("assessed_level")) {
    o.bloom_assessed = parse_level(*l);
    if (!o.bloom_assessed) fail_row(where, "assessed_level '" + *l + "' is not a Bloom level");
  }
  o.rationale = get("rationale");
  return o;
}

}  // namespace

ObjectiveSet import_set(std::string_view payload, SetFormat format, const std::string& source,
                        const std::string& created_at) {
  std::vector<std::pair<std::string, Record>> records;
  if (format == SetFormat::csv) {
    const auto rows = csv::parse(payload);
    if (rows.empty()) throw Error(ErrorCode::import_malformed, "empty file");
    std::vector<std::string> header;
    for (const auto& h : rows[0]) header.push_back(to_lower(trim(h)));
    if (std::find(header.begin(), header.end(), "text") == header.end()) {
      throw Error(ErrorCode::import_malformed, "row 1: header must include a 'text' column");
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const std::string where = "row " + std::to_string(r + 1);
      if (rows[r].size() > header.size()) fail_row(where, "more fields than header columns");
      Record rec;
      for (std::size_t c = 0; c < rows[r].size(); ++c) rec[header[c]] = rows[r][c];
      records.emplace_back(where, std::move(rec));
    }
  } else {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::import_malformed, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorCode::import_malformed, "JSON import must be an array of objects");
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const std::string where = "item " + std::to_string(i + 1);
      if (!doc[i].is_object()) fail_row(where, "must be an object");
      Record rec;
      for (const auto& [key, value] : doc[i].items()) {
        if (value.is_null()) continue;
        if (!value.is_string()) fail_row(where, "column '" + key + "' must be a string");
        rec[key] = value.get<std::string>();
      }
      records.emplace_back(where, std::move(rec));
    }
  }
  if (records.empty()) throw Error(ErrorCode::import_malformed, "empty file: no objective records");

  ObjectiveSet set;
  set.id = "set-" + hex64(fnv1a64(payload)).substr(0, 12);
  set.title = source;
  set.source = source;
  set.created_at = created_at.empty() ? format_timestamp(std::chrono::system_clock::now()) : created_at;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto obj = objective_from_record(records[i].second, records[i].first, source, i);
    if (!seen.insert(obj.id).second) fail_row(records[i].first, "duplicate id '" + obj.id + "'");
    set.objectives.push_back(std::move(obj));
  }
  return set;
}

std::string export_set(const ObjectiveSet& set, SetFormat format) {
  const auto fields = [](const LearningObjective& o) {
    return std::vector<std::pair<std::string, std::optional<std::string>>>{
        {"id", o.id},
        {"text", o.text},
        {"subject", o.subject},
        {"grade_level", o.grade_level ? std::optional<std::string>(std::string(to_string(*o.grade_level))) : std::nullopt},
        {"declared_level", o.bloom_declared ? std::optional<std::string>(std::string(to_string(*o.bloom_declared))) : std::nullopt},
        {"assessed_level", o.bloom_assessed ? std::optional<std::string>(std::string(to_string(*o.bloom_assessed))) : std::nullopt},
        {"provenance", std::string(to_string(o.provenance))},
        {"curation", std::string(to_string(o.curation))},
        {"rationale", o.rationale},
    };
  };
  if (format == SetFormat::csv) {
    std::string out = csv::format_row(objective_csv_columns());
    for (const auto& o : set.objectives) {
      csv::Row row;
      for (auto& [key, value] : fields(o)) row.push_back(value.value_or(""));
      out += csv::format_row(row);
    }
    return out;
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& o : set.objectives) {
    nlohmann::json item = nlohmann::json::object();
    for (auto& [key, value] : fields(o)) {
      if (value) item[key] = *value;
    }
    arr.push_back(std::move(item));
  }
  return arr.dump() + "\n";
}

// --- JSON -------------------------------------------------------------------

void to_json(nlohmann::json& j, const AbcdParts& v) {
  j = nlohmann::json{{"behavior", v.behavior}};
  jsonu::put_optional(j, "audience", v.audience);
  jsonu::put_optional(j, "condition", v.condition);
  jsonu::put_optional(j, "degree", v.degree);
}

void from_json(const nlohmann::json& j, AbcdParts& v) {
  v.behavior = jsonu::require_string(j, "behavior");
  v.audience = jsonu::optional_string(j, "audience");
  v.condition = jsonu::optional_string(j, "condition");
  v.degree = jsonu::optional_string(j, "degree");
}

namespace {

template <typename Parse>
auto parse_field(const nlohmann::json& j, const char* key, Parse parse) -> decltype(parse(std::string_view{})) {
  const auto s = jsonu::optional_string(j, key);
  if (!s) return std::nullopt;
  auto v = parse(*s);
  if (!v) throw Error(ErrorCode::bad_request, std::string("field '") + key + "' has unknown value '" + *s + "'");
  return v;
}

}  // namespace

void to_json(nlohmann::json& j, const LearningObjective& v) {
  j = nlohmann::json{{"id", v.id},
                     {"text", v.text},
                     {"provenance", to_string(v.provenance)},
                     {"curation", to_string(v.curation)}};
  jsonu::put_optional(j, "subject", v.subject);
  if (v.grade_level) j["grade_level"] = to_string(*v.grade_level);
  if (v.abcd) j["abcd"] = *v.abcd;
  if (v.bloom_declared) j["declared_level"] = to_string(*v.bloom_declared);
  if (v.bloom_assessed) j["assessed_level"] = to_string(*v.bloom_assessed);
  jsonu::put_optional(j, "rationale", v.rationale);
}

void from_json(const nlohmann::json& j, LearningObjective& v) {
  v.id = jsonu::require_string(j, "id");
  v.text = jsonu::require_string(j, "text");
  v.subject = jsonu::optional_string(j, "subject");
  v.grade_level = parse_field(j, "grade_level", parse_grade_level);
  v.abcd = j.contains("abcd") && !j.at("abcd").is_null() ? std::optional<AbcdParts>(j.at("abcd").get<AbcdParts>())
                                                         : std::nullopt;
  v.bloom_declared = parse_field(j, "declared_level", parse_level);
  v.bloom_assessed = parse_field(j, "assessed_level", parse_level);
  v.provenance = parse_field(j, "provenance", parse_provenance).value_or(Provenance::human_authored);
  v.curation = parse_field(j, "curation", parse_curation).value_or(Curation::pending);
  v.rationale = jsonu::optional_string(j, "rationale");
  check_objective_fields(v);
}

void to_json(nlohmann::json& j, const GenerationSpec& v) {
  nlohmann::json levels = nlohmann::json::array();
  for (auto l : v.target_levels) levels.push_back(to_string(l));
  j = nlohmann::json{{"grade_level", to_string(v.grade_level)},
                     {"subject", v.subject},
                     {"topic", v.topic},
                     {"target_levels", levels},
                     {"count_per_level", v.count_per_level}};
  jsonu::put_optional(j, "extra_context", v.extra_context);
}

void from_json(const nlohmann::json& j, GenerationSpec& v) {
  const auto grade = jsonu::require_string(j, "grade_level");
  const auto g = parse_grade_level(grade);
  if (!g) throw Error(ErrorCode::invalid_input, "grade_level '" + grade + "' is not a known grade level");
  v.grade_level = *g;
  v.subject = jsonu::require_string(j, "subject");
  v.topic = jsonu::require_string(j, "topic");
  const auto& levels = jsonu::require(j, "target_levels");
  if (!levels.is_array()) throw Error(ErrorCode::bad_request, "field 'target_levels' must be an array");
  v.target_levels.clear();
  for (const auto& l : levels) {
    const auto parsed = l.is_string() ? parse_level(l.get<std::string>()) : std::nullopt;
    if (!parsed) throw Error(ErrorCode::invalid_input, "target_levels holds an unknown Bloom level: " + l.dump());
    v.target_levels.insert(*parsed);
  }
  const auto& count = jsonu::require(j, "count_per_level");
  if (!count.is_number_integer()) throw Error(ErrorCode::bad_request, "field 'count_per_level' must be an integer");
  v.count_per_level = count.get<int>();
  v.extra_context = jsonu::optional_string(j, "extra_context");
}

void to_json(nlohmann::json& j, const ObjectiveSet& v) {
  j = nlohmann::json{{"id", v.id},
                     {"title", v.title},
                     {"objectives", v.objectives},
                     {"created_at", v.created_at},
                     {"source", v.source}};
}

void from_json(const nlohmann::json& j, ObjectiveSet& v) {
  v.id = jsonu::require_string(j, "id");
  v.title = jsonu::require_string(j, "title");
  v.objectives = jsonu::require(j, "objectives").get<std::vector<LearningObjective>>();
  v.created_at = jsonu::require_string(j, "created_at");
  v.source = jsonu::require_string(j, "source");
}

}  // namespace arched
