#include <doctest.h>

#include "arched/error.hpp"
#include "arched/session.hpp"
#include "arched/store.hpp"

#include "generators.hpp"
#include "session_fuzz.hpp"

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

using namespace arched;
namespace wf = arched::workflow;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::internal;
}

std::map<std::string, Curation> select_first(const Session& s, std::size_t n) {
  std::map<std::string, Curation> d;
  for (const auto& o : wf::all_objectives(s)) {
    if (d.size() == n) break;
    d[o.id] = Curation::selected;
  }
  return d;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("arched-test-" + random_id(""));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

Session reviewed_session(testgen::StubStack& stack, const std::string& id = "s1") {
  auto s = wf::create_session("Lists", testgen::sample_spec(), stack.engines(), id);
  return wf::run_generation(s, stack.engines());
}

}  // namespace

TEST_CASE("state names and transition table") {
  for (int i = 0; i < 6; ++i) {
    const auto st = static_cast<SessionState>(i);
    CHECK(parse_session_state(to_string(st)) == st);
    CHECK_FALSE(transition_allowed(st, SessionState::Draft));
    CHECK_FALSE(transition_allowed(SessionState::Finalized, st));
  }
  CHECK(transition_allowed(SessionState::Draft, SessionState::Generating));
  CHECK(transition_allowed(SessionState::Generating, SessionState::Review));
  CHECK(transition_allowed(SessionState::Review, SessionState::Generating));
  CHECK(transition_allowed(SessionState::Review, SessionState::Analyzed));
  CHECK(transition_allowed(SessionState::Analyzed, SessionState::Review));
  CHECK(transition_allowed(SessionState::Analyzed, SessionState::AssessmentDraft));
  CHECK(transition_allowed(SessionState::AssessmentDraft, SessionState::Finalized));
  CHECK_FALSE(transition_allowed(SessionState::Review, SessionState::AssessmentDraft));
  CHECK_FALSE(transition_allowed(SessionState::Draft, SessionState::Analyzed));
}

TEST_CASE("create and update spec") {
  testgen::StubStack stack;
  auto s = wf::create_session("Lists", testgen::sample_spec(), stack.engines());
  CHECK(s.state == SessionState::Draft);
  CHECK(s.working_set.objectives.empty());
  CHECK(s.audit.size() == 1);
  CHECK(s.audit[0].action == AuditAction::session_created);
  CHECK(s.audit[0].actor == Actor::educator);

  auto updated = wf::update_spec(s, testgen::sample_spec({BloomLevel::Create}, 3), stack.engines());
  CHECK(updated.audit.size() == 2);
  CHECK(updated.spec.count_per_level == 3);

  auto bad = testgen::sample_spec();
  bad.count_per_level = 0;
  CHECK(code_of([&] { wf::update_spec(s, bad, stack.engines()); }) == ErrorCode::invalid_input);
}

TEST_CASE("update_spec outside Draft and Review is an invalid transition") {
  testgen::StubStack stack;
  auto s = reviewed_session(stack);
  s = wf::curate(s, select_first(s, 2), stack.engines());
  s = wf::run_analysis(s, stack.engines());
  REQUIRE(s.state == SessionState::Analyzed);
  CHECK(code_of([&] { wf::update_spec(s, testgen::sample_spec(), stack.engines()); }) ==
        ErrorCode::invalid_transition);
}

TEST_CASE("generate then curate two of four") {
  testgen::StubStack stack;
  auto s = reviewed_session(stack);
  CHECK(s.state == SessionState::Review);
  REQUIRE(s.batches.size() == 1);
  REQUIRE(wf::all_objectives(s).size() == 4);
  CHECK(s.audit.back().action == AuditAction::objectives_generated);
  CHECK(s.audit.back().actor == Actor::logs);
  for (const auto& o : wf::all_objectives(s)) CHECK(o.curation == Curation::pending);

  s = wf::curate(s, select_first(s, 2), stack.engines());
  CHECK(s.working_set.objectives.size() == 2);
  CHECK(s.audit.back().action == AuditAction::curation_applied);
  CHECK(s.audit.back().actor == Actor::educator);
}

TEST_CASE("curate is atomic") {
  testgen::StubStack stack;
  const auto s = reviewed_session(stack);
  auto decisions = select_first(s, 2);
  decisions["no-such-objective"] = Curation::selected;
  Session copy = s;
  CHECK(code_of([&] { copy = wf::curate(s, decisions, stack.engines()); }) == ErrorCode::unknown_objective);
  CHECK(copy == s);
  CHECK(code_of([&] { wf::curate(s, {}, stack.engines()); }) == ErrorCode::invalid_input);
  const auto id = wf::all_objectives(s)[0].id;
  CHECK(code_of([&] { wf::curate(s, {{id, Curation::pending}}, stack.engines()); }) == ErrorCode::invalid_input);
}

TEST_CASE("re-decisions are allowed") {
  testgen::StubStack stack;
  auto s = reviewed_session(stack);
  const auto id = wf::all_objectives(s)[0].id;
  s = wf::curate(s, {{id, Curation::rejected}}, stack.engines());
  s = wf::curate(s, {{id, Curation::selected}}, stack.engines());
  CHECK(wf::all_objectives(s)[0].curation == Curation::selected);
  CHECK(s.working_set.objectives.size() == 1);
}

TEST_CASE("analysis preconditions and history") {
  testgen::StubStack stack;
  auto s = reviewed_session(stack);
  try {
    wf::run_analysis(s, stack.engines());
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::precondition);
    CHECK(std::string(e.what()).find("select at least one objective") != std::string::npos);
  }

  s = wf::curate(s, select_first(s, 4), stack.engines());
  s = wf::run_analysis(s, stack.engines());
  CHECK(s.state == SessionState::Analyzed);
  REQUIRE(s.reports.size() == 1);
  int total = 0;
  for (int c : s.reports[0].distribution) total += c;
  CHECK(total == 4);
  CHECK(s.audit.back().actor == Actor::oae);

  // Re-curating from Analyzed goes back to Review; a second analysis keeps the first report.
  const auto first = wf::all_objectives(s)[0].id;
  s = wf::curate(s, {{first, Curation::rejected}}, stack.engines());
  CHECK(s.state == SessionState::Review);
  s = wf::run_analysis(s, stack.engines());
  REQUIRE(s.reports.size() == 2);
  int second_total = 0;
  for (int c : s.reports[1].distribution) second_total += c;
  CHECK(second_total == 3);
}

TEST_CASE("six selected objectives give a distribution summing to six") {
  testgen::StubStack stack;
  auto s = wf::create_session("All", testgen::sample_spec({BloomLevel::Remember, BloomLevel::Understand,
                                                           BloomLevel::Apply, BloomLevel::Analyze,
                                                           BloomLevel::Evaluate, BloomLevel::Create},
                                                          1),
                              stack.engines());
  s = wf::run_generation(s, stack.engines());
  s = wf::curate(s, select_first(s, 6), stack.engines());
  s = wf::run_analysis(s, stack.engines());
  int total = 0;
  for (int c : s.reports.back().distribution) total += c;
  CHECK(total == 6);
  CHECK(s.reports.back().gaps.empty());
}

TEST_CASE("assessments and finalization") {
  testgen::StubStack stack;
  auto s = reviewed_session(stack);
  CHECK(code_of([&] { wf::draft_assessments(s, 1, stack.engines()); }) == ErrorCode::invalid_transition);
  s = wf::curate(s, select_first(s, 2), stack.engines());
  s = wf::run_analysis(s, stack.engines());
  CHECK(code_of([&] { wf::draft_assessments(s, 0, stack.engines()); }) == ErrorCode::invalid_input);
  CHECK(code_of([&] { wf::finalize(s, stack.engines()); }) == ErrorCode::invalid_transition);

  s = wf::draft_assessments(s, 1, stack.engines());
  CHECK(s.state == SessionState::AssessmentDraft);
  REQUIRE(s.assessments.size() == 2);
  for (const auto& item : s.assessments) {
    const auto& report = s.reports.back();
    const auto it = std::find_if(report.analyses.begin(), report.analyses.end(),
                                 [&](const ObjectiveAnalysis& a) { return a.objective_id == item.objective_id; });
    REQUIRE(it != report.analyses.end());
    CHECK(item.bloom_target == it->assessed_level);
  }

  s = wf::finalize(s, stack.engines());
  CHECK(s.state == SessionState::Finalized);
  CHECK(s.audit.back().action == AuditAction::session_finalized);
  const auto id = wf::all_objectives(s)[0].id;
  CHECK(code_of([&] { wf::curate(s, {{id, Curation::rejected}}, stack.engines()); }) ==
        ErrorCode::invalid_transition);
  CHECK(code_of([&] { wf::run_generation(s, stack.engines()); }) == ErrorCode::invalid_transition);
  CHECK(code_of([&] { wf::update_spec(s, testgen::sample_spec(), stack.engines()); }) ==
        ErrorCode::invalid_transition);
}

TEST_CASE("import moves to Review and rejects id clashes") {
  testgen::StubStack stack;
  auto s = wf::create_session("Imported", testgen::sample_spec(), stack.engines());
  std::mt19937_64 rng(1);
  const auto set = testgen::random_import_set(rng, "a", 4);
  s = wf::import_objectives(s, set, stack.engines());
  CHECK(s.state == SessionState::Review);
  CHECK(s.audit.back().action == AuditAction::objectives_imported);
  CHECK(wf::all_objectives(s).size() == set.objectives.size());
  CHECK(code_of([&] { wf::import_objectives(s, set, stack.engines()); }) == ErrorCode::conflict);
  auto selected = set;
  selected.objectives[0].id = "fresh";
  selected.objectives[0].curation = Curation::selected;
  CHECK(code_of([&] { wf::import_objectives(s, selected, stack.engines()); }) == ErrorCode::invalid_input);
}

TEST_CASE("regenerate keeps curation and records feedback") {
  testgen::StubStack stack;
  auto s = reviewed_session(stack);
  const auto objs = wf::all_objectives(s);
  s = wf::curate(s, {{objs[0].id, Curation::selected}, {objs[1].id, Curation::rejected}}, stack.engines());
  s = wf::regenerate(s, "more applied examples", {objs[0].id}, stack.engines());
  CHECK(s.state == SessionState::Review);
  CHECK(s.batches.size() == 2);
  CHECK(s.audit.back().action == AuditAction::objectives_regenerated);
  CHECK(s.working_set.objectives.size() == 1);
  CHECK(s.working_set.objectives[0].id == objs[0].id);
  CHECK(code_of([&] { wf::regenerate(s, "", {"nope"}, stack.engines()); }) == ErrorCode::unknown_objective);

  auto fresh = wf::create_session("x", testgen::sample_spec(), stack.engines());
  CHECK(code_of([&] { wf::regenerate(fresh, "", {}, stack.engines()); }) == ErrorCode::invalid_transition);
}

TEST_CASE("audit timestamps never go backwards") {
  auto t = std::make_shared<std::atomic<long long>>(1'760'000'000'000LL);
  Clock backwards = [t] { return TimePoint(std::chrono::milliseconds(t->fetch_sub(1000))); };
  testgen::StubStack stack(backwards);
  auto s = reviewed_session(stack);
  s = wf::curate(s, select_first(s, 1), stack.engines());
  for (std::size_t i = 1; i < s.audit.size(); ++i) CHECK(s.audit[i - 1].timestamp <= s.audit[i].timestamp);
}

TEST_CASE("session JSON roundtrip and schema version") {
  testgen::StubStack stack;
  auto s = reviewed_session(stack);
  s = wf::curate(s, select_first(s, 3), stack.engines());
  s = wf::run_analysis(s, stack.engines());
  s = wf::draft_assessments(s, 2, stack.engines());
  nlohmann::json j = s;
  CHECK(j.at("schema_version") == k_session_schema_version);
  CHECK(j.get<Session>() == s);
  j["schema_version"] = 99;
  CHECK(code_of([&] { j.get<Session>(); }) == ErrorCode::bad_request);
}

TEST_CASE("store roundtrip, versions and errors") {
  TempDir tmp;
  SessionStore store(tmp.path);
  testgen::StubStack stack;
  auto s = reviewed_session(stack, "roundtrip");
  CHECK_FALSE(store.exists("roundtrip"));
  const auto saved = store.save(s);
  CHECK(saved.version == s.version + 1);
  CHECK(store.exists("roundtrip"));
  CHECK(store.load("roundtrip") == saved);
  CHECK(code_of([&] { store.save(s); }) == ErrorCode::conflict);
  CHECK(code_of([&] { store.load("missing"); }) == ErrorCode::not_found);

  std::ofstream(tmp.path / "sessions" / "broken.json") << "{not json";
  CHECK(code_of([&] { store.load("broken"); }) == ErrorCode::internal);

  CHECK(valid_session_id("s-abc_123"));
  CHECK_FALSE(valid_session_id("../etc"));
  CHECK_FALSE(valid_session_id(""));
  CHECK_FALSE(valid_session_id(std::string(129, 'a')));
}

TEST_CASE("concurrent saves of the same base version") {
  TempDir tmp;
  SessionStore store(tmp.path);
  testgen::StubStack stack;
  for (int round = 0; round < 20; ++round) {
    const auto base = store.save(wf::create_session("c", testgen::sample_spec(), stack.engines(),
                                                    "race-" + std::to_string(round)));
    std::atomic<int> ok{0}, conflicts{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 2; ++i) {
      threads.emplace_back([&, i] {
        try {
          auto s = base;
          s.title = "writer " + std::to_string(i);
          store.save(s);
          ++ok;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::conflict) ++conflicts;
        }
      });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 1);
    CHECK(conflicts == 1);
  }
}

TEST_CASE("service serializes mutations per session") {
  TempDir tmp;
  SessionStore store(tmp.path);
  testgen::StubStack stack;
  SessionService service(store, stack.engines());
  auto s = service.create("svc", testgen::sample_spec());
  s = service.mutate(s.id, [](Session x, const SessionEngines& e) { return wf::run_generation(std::move(x), e); });
  const auto ids = wf::all_objectives(s);
  std::vector<std::thread> threads;
  for (const auto& o : ids) {
    threads.emplace_back([&, id = o.id] {
      service.mutate(s.id, [&](Session x, const SessionEngines& e) {
        return wf::curate(std::move(x), {{id, Curation::selected}}, e);
      });
    });
  }
  for (auto& t : threads) t.join();
  const auto final = service.get(s.id);
  CHECK(final.working_set.objectives.size() == ids.size());
  CHECK(final.audit.size() == 2 + ids.size());
  CHECK(code_of([&] { service.get("nope"); }) == ErrorCode::not_found);
}

TEST_CASE("only curate writes curation decisions in the sources") {
  const std::filesystem::path src = std::filesystem::path(ARCHED_SOURCE_DIR) / "src";
  const std::regex write(R"(\.curation\s*=[^=])");
  int decision_writes = 0;
  for (const auto& entry : std::filesystem::directory_iterator(src)) {
    if (entry.path().extension() != ".cpp") continue;
    std::ifstream in(entry.path());
    std::string line, function;
    while (std::getline(in, line)) {
      static const std::regex def(R"(^[A-Za-z].*\b(\w+)\(.*\{\s*$)");
      std::smatch m;
      if (std::regex_search(line, m, def)) function = m[1];
      if (!std::regex_search(line, write)) continue;
      CAPTURE(entry.path().filename().string());
      CAPTURE(line);
      const bool resets_to_pending = line.find("= Curation::pending;") != std::string::npos;
      const bool deserializes = function == "from_json";
      const bool in_curate = entry.path().filename() == "session.cpp" && function == "curate";
      CHECK((resets_to_pending || deserializes || in_curate));
      decision_writes += in_curate;
    }
  }
  CHECK(decision_writes == 1);
}

TEST_CASE("random operation sequences keep the invariants") {
  testgen::StubStack stack(testgen::stepping_clock(), 1);
  std::mt19937_64 rng(314);
  testgen::FuzzTally tally;
  for (int i = 0; i < 400; ++i) {
    const auto failure = testgen::fuzz_session(rng, stack.engines(), 14, tally, i);
    if (failure) FAIL(*failure);
  }
  CHECK(tally.accepted > 1000);
  CHECK(tally.rejected > 1000);
  CHECK(tally.curate_accepted > 100);
}
