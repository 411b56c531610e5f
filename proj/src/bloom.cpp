#include "arched/bloom.hpp"

#include "arched/error.hpp"
#include "arched/resources.hpp"
#include "arched/util.hpp"

#include <cctype>
#include <cstdlib>

namespace arched {

namespace {

constexpr std::array<std::string_view, 6> k_level_names = {
    "Remember", "Understand", "Apply", "Analyze", "Evaluate", "Create"};

const std::map<std::string_view, std::string_view>& irregular_forms() {
  static const std::map<std::string_view, std::string_view> table = {
      {"wrote", "write"},      {"written", "write"},   {"writing", "write"},
      {"built", "build"},      {"chose", "choose"},    {"chosen", "choose"},
      {"drew", "draw"},        {"drawn", "draw"},      {"gave", "give"},
      {"given", "give"},       {"made", "make"},       {"knew", "know"},
      {"known", "know"},       {"understood", "understand"},
      {"told", "tell"},        {"did", "do"},          {"done", "do"},
      {"ran", "run"},          {"taught", "teach"},    {"thought", "think"},
      {"sought", "seek"},      {"found", "find"},      {"showed", "show"},
      {"shown", "show"},       {"saw", "see"},         {"seen", "see"},
      {"analyses", "analyze"}, {"analysing", "analyze"}, {"analysed", "analyze"},
      {"analyse", "analyze"},  {"summarise", "summarize"}, {"categorise", "categorize"},
      {"organise", "organize"}, {"memorise", "memorize"}, {"recognise", "recognize"},
      {"criticize", "critique"}, {"criticise", "critique"},
  };
  return table;
}

bool is_word_char(unsigned char c) {
  return std::isalnum(c) != 0 || c == '\'' || c == '-' || c >= 0x80;
}

}  // namespace

std::string_view to_string(BloomLevel level) { return k_level_names.at(index(level)); }

std::optional<BloomLevel> parse_level(std::string_view name) {
  const std::string lowered = to_lower(trim(name));
  for (std::size_t i = 0; i < k_level_names.size(); ++i) {
    if (to_lower(k_level_names[i]) == lowered) return level_at(static_cast<int>(i));
  }
  return std::nullopt;
}

VerbLexicon VerbLexicon::parse(std::string_view text) {
  VerbLexicon lex;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto tab = stripped.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::invalid_input,
                  "lexicon line " + std::to_string(line_no) + ": expected verb<TAB>level");
    }
    const std::string verb = to_lower(trim(std::string_view(stripped).substr(0, tab)));
    const auto level = parse_level(std::string_view(stripped).substr(tab + 1));
    if (verb.empty() || !level) {
      throw Error(ErrorCode::invalid_input,
                  "lexicon line " + std::to_string(line_no) + ": bad verb or level");
    }
    if (!lex.entries_.emplace(verb, *level).second) {
      throw Error(ErrorCode::invalid_input,
                  "lexicon line " + std::to_string(line_no) + ": duplicate verb '" + verb + "'");
    }
  }
  return lex;
}

VerbLexicon VerbLexicon::load(const std::string& path) { return parse(read_file(path)); }

std::optional<BloomLevel> VerbLexicon::lookup(std::string_view lemma) const {
  const auto it = entries_.find(lemma);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> VerbLexicon::verbs_for_level(BloomLevel level) const {
  std::vector<std::string> out;
  for (const auto& [verb, lvl] : entries_) {
    if (lvl == level) out.push_back(verb);
  }
  return out;  // std::map iteration is already sorted
}

const VerbLexicon& default_lexicon() {
  static const VerbLexicon lex = [] {
    if (const char* path = std::getenv("ARCHED_LEXICON_PATH"); path && *path) {
      return VerbLexicon::load(path);
    }
    return VerbLexicon::parse(template_text("bloom_verbs"));
  }();
  return lex;
}

std::vector<std::string> verbs_for_level(BloomLevel level) {
  return default_lexicon().verbs_for_level(level);
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_char(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t begin = i;
    while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
    if (i > begin) {
      // Hyphens and apostrophes only count inside a word.
      std::size_t b = begin;
      std::size_t e = i;
      while (b < e && (text[b] == '-' || text[b] == '\'')) ++b;
      while (e > b && (text[e - 1] == '-' || text[e - 1] == '\'')) --e;
      if (e > b) tokens.push_back({to_lower(text.substr(b, e - b)), b, e});
    }
  }
  return tokens;
}

std::vector<std::string> lemma_candidates(std::string_view token) {
  std::vector<std::string> out;
  const std::string t(token);
  out.push_back(t);
  if (const auto it = irregular_forms().find(t); it != irregular_forms().end()) {
    out.emplace_back(it->second);
  }
  const auto ends_with = [&](std::string_view suffix) {
    return t.size() > suffix.size() + 1 && t.ends_with(suffix);
  };
  const auto undouble = [](const std::string& stem) -> std::optional<std::string> {
    const auto n = stem.size();
    if (n >= 2 && stem[n - 1] == stem[n - 2] && std::isalpha(static_cast<unsigned char>(stem[n - 1]))) {
      return stem.substr(0, n - 1);
    }
    return std::nullopt;
  };
  if (ends_with("ies")) out.push_back(t.substr(0, t.size() - 3) + "y");
  if (ends_with("es")) out.push_back(t.substr(0, t.size() - 2));
  if (ends_with("s") && !t.ends_with("ss")) out.push_back(t.substr(0, t.size() - 1));
  if (ends_with("ing")) {
    const std::string stem = t.substr(0, t.size() - 3);
    out.push_back(stem);
    out.push_back(stem + "e");
    if (auto u = undouble(stem)) out.push_back(*u);
  }
  if (ends_with("ied")) out.push_back(t.substr(0, t.size() - 3) + "y");
  if (ends_with("ed")) {
    const std::string stem = t.substr(0, t.size() - 2);
    out.push_back(stem);
    out.push_back(stem + "e");
    if (auto u = undouble(stem)) out.push_back(*u);
  }
  return out;
}

std::optional<BloomLevel> classify_by_verb(std::string_view text, const VerbLexicon& lexicon) {
  if (trim(text).empty()) throw Error(ErrorCode::invalid_input, "objective text must be non-empty");
  for (const auto& tok : tokenize(text)) {
    const auto lemma = lemmatize_if(tok.word, [&](const std::string& c) { return lexicon.contains(c); });
    if (lemma) return lexicon.lookup(*lemma);
  }
  return std::nullopt;
}

}  // namespace arched
