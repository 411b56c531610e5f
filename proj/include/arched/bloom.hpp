#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace arched {

// Revised-taxonomy cognitive levels in ordinal order.
enum class BloomLevel : int { Remember = 0, Understand, Apply, Analyze, Evaluate, Create };

inline constexpr std::array<BloomLevel, 6> k_all_levels = {
    BloomLevel::Remember, BloomLevel::Understand, BloomLevel::Apply,
    BloomLevel::Analyze,  BloomLevel::Evaluate,   BloomLevel::Create};

constexpr int index(BloomLevel level) { return static_cast<int>(level); }
constexpr BloomLevel level_at(int i) { return static_cast<BloomLevel>(i); }

std::string_view to_string(BloomLevel level);

// Case-insensitive match on the six level names.
std::optional<BloomLevel> parse_level(std::string_view name);

constexpr int level_distance(BloomLevel a, BloomLevel b) {
  const int d = index(a) - index(b);
  return d < 0 ? -d : d;
}

// Linear ordinal agreement: 1.0, 0.8, 0.6, 0.4, 0.2, 0.0 for distances 0..5.
constexpr double agreement_weight(BloomLevel a, BloomLevel b) {
  return static_cast<double>(5 - level_distance(a, b)) / 5.0;
}

class VerbLexicon {
 public:
  // Parses the line-oriented `verb<TAB>level` format. `#` starts a comment
  // (whole line or trailing). Throws invalid-input on malformed lines,
  // unknown levels or a verb listed twice.
  static VerbLexicon parse(std::string_view text);
  static VerbLexicon load(const std::string& path);

  std::optional<BloomLevel> lookup(std::string_view lemma) const;
  bool contains(std::string_view lemma) const { return lookup(lemma).has_value(); }

  // Sorted lexicographically.
  std::vector<std::string> verbs_for_level(BloomLevel level) const;

  const std::map<std::string, BloomLevel, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, BloomLevel, std::less<>> entries_;
};

// The lexicon compiled into the library, or the file named by
// ARCHED_LEXICON_PATH when that variable is set at first use.
const VerbLexicon& default_lexicon();

std::vector<std::string> verbs_for_level(BloomLevel level);

// Lowercased word tokens (letters, digits, apostrophes, hyphens) with their
// byte offsets in the source text.
struct Token {
  std::string word;
  std::size_t begin = 0;
  std::size_t end = 0;
};
std::vector<Token> tokenize(std::string_view text);

// Candidate lemmas for a lowercase token, most literal first: the token
// itself, the irregular-form table, then -ies/-es/-s/-ing/-ed stripping.
std::vector<std::string> lemma_candidates(std::string_view token);

// First candidate lemma that the predicate accepts.
template <typename Pred>
std::optional<std::string> lemmatize_if(std::string_view token, Pred&& accept) {
  for (auto& cand : lemma_candidates(token)) {
    if (accept(cand)) return cand;
  }
  return std::nullopt;
}

// Level of the first lexicon verb in token order, or nullopt
// (Unclassified). Throws invalid-input on empty text.
std::optional<BloomLevel> classify_by_verb(std::string_view text,
                                           const VerbLexicon& lexicon = default_lexicon());

}  // namespace arched
