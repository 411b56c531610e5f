#pragma once

// Randomized inputs and stub-backed engine stacks shared by the tests.

#include "arched/assess.hpp"
#include "arched/logs.hpp"
#include "arched/oae.hpp"
#include "arched/session.hpp"

#include <atomic>
#include <chrono>
#include <memory>
#include <random>
#include <string>

namespace testgen {

using namespace arched;

// Clock that advances one millisecond per reading.
inline Clock stepping_clock() {
  auto t = std::make_shared<std::atomic<long long>>(1'760'000'000'000LL);
  return [t] { return TimePoint(std::chrono::milliseconds(t->fetch_add(1))); };
}

struct StubStack {
  llm::Gateway gateway;
  LogsEngine logs;
  OaeEngine oae;
  AssessmentDrafter drafter;
  Clock clock;

  explicit StubStack(Clock c = stepping_clock(), int max_in_flight = 4)
      : gateway(config(max_in_flight)), logs(gateway, c), oae(gateway, c), drafter(gateway), clock(c) {}

  SessionEngines engines() const { return SessionEngines{&logs, &oae, &drafter, clock}; }

  static llm::BackendConfig config(int max_in_flight) {
    llm::BackendConfig cfg;
    cfg.kind = llm::BackendKind::stub;
    cfg.max_in_flight = max_in_flight;
    return cfg;
  }
};

inline GenerationSpec sample_spec(std::set<BloomLevel> levels = {BloomLevel::Remember, BloomLevel::Apply},
                                  int count = 2) {
  GenerationSpec s;
  s.subject = "Computer Science";
  s.topic = "linked lists";
  s.grade_level = GradeLevel::undergraduate_intro;
  s.target_levels = std::move(levels);
  s.count_per_level = count;
  return s;
}

inline std::string pick(std::mt19937_64& rng, const std::vector<std::string>& options) {
  return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
}

inline bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

// Free text exercising CSV quoting and UTF-8; no newlines.
inline std::string random_phrase(std::mt19937_64& rng, int min_words = 1, int max_words = 8) {
  static const std::vector<std::string> words = {
      "students", "will", "compare", "sorting", "algorithms", "\"quoted\"", "comma,", "naïve",
      "Ω-notation", "with", "80%", "accuracy", "given", "a", "dataset", "design", "tests",
      "'single'", "κ", "résumé", "semi;colon", "tab\tseparated", "  spaced  "};
  const int n = std::uniform_int_distribution<int>(min_words, max_words)(rng);
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += pick(rng, words);
  }
  return out;
}

template <typename Enum, std::size_t N>
Enum pick_enum(std::mt19937_64& rng) {
  return static_cast<Enum>(std::uniform_int_distribution<int>(0, N - 1)(rng));
}

// An objective in the shape import produces (imported, pending, no ABCD).
inline LearningObjective random_import_objective(std::mt19937_64& rng, const std::string& id) {
  LearningObjective o;
  o.id = id;
  o.text = random_phrase(rng, 1, 12);
  if (coin(rng)) o.subject = random_phrase(rng, 1, 3);
  if (coin(rng)) o.grade_level = pick_enum<GradeLevel, 7>(rng);
  if (coin(rng)) o.bloom_declared = pick_enum<BloomLevel, 6>(rng);
  if (coin(rng)) o.bloom_assessed = pick_enum<BloomLevel, 6>(rng);
  if (coin(rng)) o.rationale = random_phrase(rng, 1, 6) + (coin(rng, 0.3) ? "\nsecond line" : "");
  o.provenance = Provenance::imported;
  o.curation = Curation::pending;
  return o;
}

inline ObjectiveSet random_import_set(std::mt19937_64& rng, const std::string& prefix, int max_size = 8) {
  ObjectiveSet set;
  set.id = prefix + "-set";
  set.title = prefix;
  set.source = prefix;
  set.created_at = "2026-01-01T00:00:00.000Z";
  const int n = std::uniform_int_distribution<int>(1, max_size)(rng);
  for (int i = 0; i < n; ++i) set.objectives.push_back(random_import_objective(rng, prefix + "-" + std::to_string(i)));
  return set;
}

}  // namespace testgen
