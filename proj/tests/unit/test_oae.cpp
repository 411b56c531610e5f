#include <doctest.h>

#include "arched/error.hpp"
#include "arched/oae.hpp"

#include "generators.hpp"
#include "scripted_backend.hpp"

#include <cmath>

using namespace arched;

namespace {

LearningObjective obj(std::string id, std::string text, std::optional<BloomLevel> declared = std::nullopt) {
  LearningObjective o;
  o.id = std::move(id);
  o.text = std::move(text);
  o.bloom_declared = declared;
  o.provenance = Provenance::imported;
  return o;
}

struct OfflineStack {
  llm::Gateway gateway;
  OaeEngine oae;
  OfflineStack()
      : gateway(llm::BackendConfig{}, testgen::ScriptedBackend::failing(ErrorCode::backend_unavailable)),
        oae(gateway, testgen::stepping_clock()) {}
};

const char* k_level_examples[6] = {
    "Students will list the stages of mitosis",
    "Students will explain how recursion terminates",
    "Students will implement a stack using an array",
    "Students will compare two sorting algorithms by running time",
    "Students will evaluate a proposed database schema",
    "Students will design a caching layer for a web service",
};

}  // namespace

TEST_CASE("classification through the model") {
  testgen::StubStack stack;
  const auto v = stack.oae.classify_level(obj("a", "Students will compare two sorting algorithms"));
  CHECK(v.level == BloomLevel::Analyze);
  CHECK(v.via == AssessedVia::llm);
  CHECK_FALSE(v.reasoning.empty());
}

TEST_CASE("offline classification falls back to the verb rules") {
  OfflineStack s;
  const auto v = s.oae.classify_level(obj("a", "Students will compare two sorting algorithms"));
  CHECK(v.level == BloomLevel::Analyze);
  CHECK(v.via == AssessedVia::rule_fallback);
  CHECK_FALSE(v.low_confidence);

  const auto none = s.oae.classify_level(obj("b", "Students will ponder the meaning of pointers"));
  CHECK(none.level == BloomLevel::Understand);
  CHECK(none.low_confidence);
  CHECK(none.via == AssessedVia::rule_fallback);
}

TEST_CASE("empty text is rejected before any call") {
  testgen::StubStack stack;
  for (const char* text : {"", "   "}) {
    try {
      stack.oae.classify_level(obj("a", text));
      FAIL("expected invalid-input");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_input);
    }
    CHECK_THROWS_AS(stack.oae.score_rubric(obj("a", text)), Error);
  }
}

TEST_CASE("rule rubric") {
  SUBCASE("all four ABCD parts") {
    const auto r = rule_rubric(obj("a", "Given a dataset, students will compute the mean with 90% accuracy"));
    CHECK(r.structural == 5);
    CHECK(r.measurable == 5);
    CHECK(r.rule_fallback);
  }
  SUBCASE("behavior only") {
    const auto r = rule_rubric(obj("a", "Understand recursion"));
    CHECK(r.structural == 1);
    CHECK(r.measurable == 2);
  }
  SUBCASE("taxonomic agreement") {
    CHECK(rule_rubric(obj("a", "Students will list the planets", BloomLevel::Remember)).taxonomic == 5);
    CHECK(rule_rubric(obj("a", "Students will list the planets", BloomLevel::Create)).taxonomic == 3);
  }
}

TEST_CASE("offline rubric uses the rule rubric") {
  OfflineStack s;
  const auto o = obj("a", "Students will list the planets", BloomLevel::Remember);
  CHECK(s.oae.score_rubric(o) == rule_rubric(o));
}

TEST_CASE("structural score is capped without an observable behavior") {
  testgen::StubStack stack;
  const auto r = stack.oae.score_rubric(obj("a", "Students will understand recursion"));
  CHECK(r.structural <= 2);
}

TEST_CASE("scores stay within 1..5 and the analysis leaves the objective untouched") {
  testgen::StubStack stack;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 60; ++i) {
    auto o = testgen::random_import_objective(rng, "r" + std::to_string(i));
    const auto before = o;
    const auto a = stack.oae.analyze(o);
    CHECK(o == before);
    for (auto c : k_all_criteria) {
      CHECK(a.rubric.get(c) >= 1);
      CHECK(a.rubric.get(c) <= 5);
    }
    CHECK(a.objective_id == o.id);
    if (o.bloom_declared) {
      REQUIRE(a.level_agrees_with_declared.has_value());
      CHECK(*a.level_agrees_with_declared == (*o.bloom_declared == a.assessed_level));
    } else {
      CHECK_FALSE(a.level_agrees_with_declared.has_value());
    }
  }
}

TEST_CASE("one objective per level has no gaps") {
  testgen::StubStack stack;
  ObjectiveSet set;
  set.id = "six";
  for (int i = 0; i < 6; ++i) set.objectives.push_back(obj("o" + std::to_string(i), k_level_examples[i]));
  const auto report = stack.oae.analyze_set(set);
  CHECK(report.gaps.empty());
  for (int c : report.distribution) CHECK(c == 1);
  CHECK(report.analyses.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(report.analyses[i].objective_id == set.objectives[i].id);
}

TEST_CASE("a Remember-only set has five gaps") {
  testgen::StubStack stack;
  ObjectiveSet set;
  set.id = "rem";
  set.objectives = {obj("a", "Students will list the planets"), obj("b", "Students will name the noble gases"),
                    obj("c", "Students will recall the quadratic formula")};
  const auto report = stack.oae.analyze_set(set);
  CHECK(report.distribution[index(BloomLevel::Remember)] == 3);
  CHECK(report.gaps == std::vector<BloomLevel>{BloomLevel::Understand, BloomLevel::Apply, BloomLevel::Analyze,
                                               BloomLevel::Evaluate, BloomLevel::Create});
  const auto md = render_report(report, ReportFormat::markdown);
  CHECK(md.find("Coverage gaps:") != std::string::npos);
  CHECK(md.find("Create") != std::string::npos);
}

TEST_CASE("empty set is invalid input") {
  testgen::StubStack stack;
  CHECK_THROWS_AS(stack.oae.analyze_set(ObjectiveSet{}), Error);
}

TEST_CASE("summary statistics") {
  CHECK(format_mean_sd(4.0, 0.0) == "4.0±0.0");
  CHECK(format_mean_sd(4.14, 0.36) == "4.1±0.4");
  CHECK(summarize({3.0}).sd == 0.0);
  const auto s = summarize({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(s.mean == doctest::Approx(5.0));
  CHECK(s.sd == doctest::Approx(std::sqrt(32.0 / 7.0)));

  std::vector<ObjectiveAnalysis> analyses(3);
  for (auto& a : analyses) a.rubric.structural = 4;
  const auto report = assemble_report("x", analyses, "t");
  const auto& st = report.summary.at("structural");
  CHECK(format_mean_sd(st.mean, st.sd) == "4.0±0.0");
}

TEST_CASE("summary matches an independent fold over the analyses") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 50; ++round) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    std::vector<ObjectiveAnalysis> analyses(n);
    for (auto& a : analyses) {
      for (auto c : k_all_criteria) a.rubric.set(c, std::uniform_int_distribution<int>(1, 5)(rng));
      a.assessed_level = level_at(std::uniform_int_distribution<int>(0, 5)(rng));
    }
    const auto report = assemble_report("x", analyses, "t");
    for (auto c : k_all_criteria) {
      double sum = 0.0;
      for (const auto& a : analyses) sum += a.rubric.get(c);
      const double mean = sum / n;
      double ss = 0.0;
      for (const auto& a : analyses) ss += (a.rubric.get(c) - mean) * (a.rubric.get(c) - mean);
      const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
      CHECK(report.summary.at(std::string(key_of(c))).mean == doctest::Approx(mean));
      CHECK(report.summary.at(std::string(key_of(c))).sd == doctest::Approx(sd));
    }
    int total = 0;
    for (int c : report.distribution) total += c;
    CHECK(total == n);
    for (auto g : report.gaps) CHECK(report.distribution[index(g)] == 0);
  }
}

TEST_CASE("rendering is deterministic and JSON roundtrips") {
  testgen::StubStack stack;
  ObjectiveSet set;
  set.id = "s";
  for (int i = 0; i < 6; ++i) set.objectives.push_back(obj("o" + std::to_string(i), k_level_examples[i]));
  const auto report = stack.oae.analyze_set(set);
  CHECK(render_report(report, ReportFormat::json) == render_report(report, ReportFormat::json));
  CHECK(render_report(report, ReportFormat::markdown) == render_report(report, ReportFormat::markdown));
  const auto parsed = nlohmann::json::parse(render_report(report, ReportFormat::json)).get<AnalysisReport>();
  CHECK(parsed == report);
  CHECK(parse_report_format("markdown") == ReportFormat::markdown);
  CHECK(parse_report_format("json") == ReportFormat::json);
  CHECK_FALSE(parse_report_format("pdf").has_value());
}

TEST_CASE("concurrent analysis gives the same report as sequential") {
  ObjectiveSet set;
  set.id = "many";
  std::mt19937_64 rng(3);
  for (int i = 0; i < 24; ++i) set.objectives.push_back(testgen::random_import_objective(rng, "m" + std::to_string(i)));
  testgen::StubStack serial(testgen::stepping_clock(), 1);
  testgen::StubStack parallel(testgen::stepping_clock(), 8);
  auto a = serial.oae.analyze_set(set);
  auto b = parallel.oae.analyze_set(set);
  a.created_at = b.created_at = "";
  CHECK(a == b);
}
