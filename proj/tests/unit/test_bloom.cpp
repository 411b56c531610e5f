#include <doctest.h>

#include "arched/bloom.hpp"
#include "arched/error.hpp"

#include <algorithm>
#include <set>

using namespace arched;

TEST_CASE("levels are ordered with indices 0..5") {
  CHECK(k_all_levels.size() == 6);
  CHECK(index(BloomLevel::Remember) == 0);
  CHECK(index(BloomLevel::Create) == 5);
  for (int i = 0; i < 6; ++i) CHECK(index(level_at(i)) == i);
  CHECK(to_string(BloomLevel::Analyze) == "Analyze");
  CHECK(parse_level("evaluate") == BloomLevel::Evaluate);
  CHECK(parse_level("CREATE") == BloomLevel::Create);
  CHECK_FALSE(parse_level("Synthesize").has_value());
}

TEST_CASE("level_distance") {
  CHECK(level_distance(BloomLevel::Remember, BloomLevel::Remember) == 0);
  CHECK(level_distance(BloomLevel::Remember, BloomLevel::Create) == 5);
  CHECK(level_distance(BloomLevel::Apply, BloomLevel::Analyze) == 1);
  for (auto a : k_all_levels) {
    for (auto b : k_all_levels) {
      CHECK(level_distance(a, b) == level_distance(b, a));
      CHECK((level_distance(a, b) == 0) == (a == b));
      for (auto c : k_all_levels) CHECK(level_distance(a, c) <= level_distance(a, b) + level_distance(b, c));
    }
  }
}

TEST_CASE("agreement_weight matches the six-value table") {
  CHECK(agreement_weight(BloomLevel::Understand, BloomLevel::Understand) == 1.0);
  CHECK(agreement_weight(BloomLevel::Apply, BloomLevel::Analyze) == 0.8);
  CHECK(agreement_weight(BloomLevel::Remember, BloomLevel::Create) == 0.0);
  const double table[] = {1.0, 0.8, 0.6, 0.4, 0.2, 0.0};
  for (auto a : k_all_levels) {
    for (auto b : k_all_levels) {
      const double w = agreement_weight(a, b);
      CHECK(w == table[level_distance(a, b)]);
      CHECK(w == agreement_weight(b, a));
      CHECK((w == 1.0) == (a == b));
    }
  }
}

TEST_CASE("bundled lexicon has at least ten sorted verbs per level") {
  for (auto l : k_all_levels) {
    const auto verbs = verbs_for_level(l);
    CHECK(verbs.size() >= 10);
    CHECK(std::is_sorted(verbs.begin(), verbs.end()));
  }
  const auto remember = verbs_for_level(BloomLevel::Remember);
  for (const char* v : {"list", "define", "recall"}) {
    CHECK(std::find(remember.begin(), remember.end(), v) != remember.end());
  }
  const auto create = verbs_for_level(BloomLevel::Create);
  for (const char* v : {"design", "compose"}) {
    CHECK(std::find(create.begin(), create.end(), v) != create.end());
  }
}

TEST_CASE("every lexicon verb maps to exactly one level") {
  std::set<std::string> seen;
  for (auto l : k_all_levels) {
    for (const auto& v : verbs_for_level(l)) CHECK(seen.insert(v).second);
  }
  CHECK(seen.size() == default_lexicon().entries().size());
}

TEST_CASE("lexicon parser") {
  const auto lex = VerbLexicon::parse("# header\nlist\tRemember\n\ndesign\tCreate  # also Apply\n");
  CHECK(lex.lookup("list") == BloomLevel::Remember);
  CHECK(lex.lookup("design") == BloomLevel::Create);
  CHECK_FALSE(lex.contains("apply"));
  CHECK_THROWS_AS(VerbLexicon::parse("list\tRemember\nlist\tApply\n"), Error);
  CHECK_THROWS_AS(VerbLexicon::parse("list\tSynthesize\n"), Error);
  CHECK_THROWS_AS(VerbLexicon::parse("list Remember extra\n"), Error);
}

TEST_CASE("classify_by_verb examples") {
  CHECK(classify_by_verb("Students will list the six levels of Bloom's taxonomy") == BloomLevel::Remember);
  CHECK(classify_by_verb("Students will design a caching layer for a web service") == BloomLevel::Create);
  CHECK_FALSE(classify_by_verb("Students will vibe with recursion").has_value());
  CHECK(classify_by_verb("Students will compare two sorting algorithms") == BloomLevel::Analyze);
}

TEST_CASE("classify_by_verb rejects empty text") {
  try {
    classify_by_verb("");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_input);
  }
}

TEST_CASE("classify_by_verb uses the first hit in token order") {
  // "create" (Create) appears after "list" (Remember).
  CHECK(classify_by_verb("Learners list then create diagrams") == BloomLevel::Remember);
  CHECK(classify_by_verb("Learners create then list diagrams") == BloomLevel::Create);
}

TEST_CASE("lemmatization handles inflected verbs") {
  CHECK(classify_by_verb("The student designs a schema") == BloomLevel::Create);
  CHECK(classify_by_verb("The student classifies species") == BloomLevel::Analyze);
  CHECK(classify_by_verb("Listing the steps of mitosis") == BloomLevel::Remember);
  CHECK(classify_by_verb("Students compared two proofs") == BloomLevel::Analyze);
  CHECK(classify_by_verb("Students justified their answer") == BloomLevel::Evaluate);
  CHECK(classify_by_verb("Students wrote an essay") == BloomLevel::Create);
  const auto cands = lemma_candidates("planning");
  CHECK(std::find(cands.begin(), cands.end(), "plan") != cands.end());
}

TEST_CASE("tokenize records byte offsets") {
  const std::string text = "Given X, students will list";
  for (const auto& t : tokenize(text)) {
    std::string lower;
    for (char ch : text.substr(t.begin, t.end - t.begin)) lower += static_cast<char>(std::tolower(ch));
    CHECK(lower == t.word);
  }
}

TEST_CASE("classification is deterministic") {
  const std::string s = "Participants will evaluate competing hypotheses within one week";
  const auto first = classify_by_verb(s);
  for (int i = 0; i < 20; ++i) CHECK(classify_by_verb(s) == first);
}

TEST_CASE("canonical sentence family classifies to the lexicon level") {
  for (const auto& [verb, level] : default_lexicon().entries()) {
    CAPTURE(verb);
    CHECK(classify_by_verb("Students will " + verb + " the material") == level);
  }
}
