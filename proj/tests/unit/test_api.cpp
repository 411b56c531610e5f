#include <doctest.h>

#include "arched/api.hpp"
#include "arched/error.hpp"
#include "arched/evalstats.hpp"

#include "e2e_flow.hpp"

#include <fstream>
#include <set>
#include <sys/socket.h>

using namespace arched;
using nlohmann::json;
using testgen::LiveService;

namespace {

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

std::string create_session(LiveService& live) {
  auto r = live.post("/api/sessions", {{"title", "T"}, {"spec", testgen::flow_spec()}});
  REQUIRE(r);
  REQUIRE(r->status == 201);
  return body_of(r)["id"];
}

}  // namespace

TEST_CASE("every error code has one status") {
  std::set<std::string> names;
  for (auto code : all_error_codes()) {
    const int status = api::status_for(code);
    CHECK(status >= 400);
    CHECK(status < 600);
    names.insert(std::string(to_string(code)));
  }
  CHECK(names.size() == all_error_codes().size());
  CHECK(api::status_for(ErrorCode::not_found) == 404);
  CHECK(api::status_for(ErrorCode::invalid_transition) == 409);
  CHECK(api::status_for(ErrorCode::conflict) == 409);
  CHECK(api::status_for(ErrorCode::bad_request) == 400);
  CHECK(api::status_for(ErrorCode::unknown_objective) == 422);
  CHECK(api::status_for(ErrorCode::backend_unavailable) == 503);
  CHECK(api::status_for(ErrorCode::backend_timeout) == 504);
  CHECK(api::status_for(ErrorCode::internal) == 500);
}

TEST_CASE("offline end-to-end flow") {
  for (const auto& c : testgen::run_offline_flow()) {
    CAPTURE(c.detail);
    INFO(c.name);
    CHECK(c.ok);
  }
}

TEST_CASE("health and version header") {
  LiveService live;
  auto r = live.client->Get("/api/health");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value("X-Arched-Api") == "1");
  const auto j = body_of(r);
  CHECK(j["status"] == "ok");
  CHECK(j["api_version"] == "1");

  auto missing = live.client->Get("/api/nowhere");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(missing->get_header_value("X-Arched-Api") == "1");
  CHECK(body_of(missing)["code"] == "not-found");
}

TEST_CASE("session errors map to statuses") {
  LiveService live;
  const auto id = create_session(live);
  const std::string base = "/api/sessions/" + id;

  auto r = live.client->Get("/api/sessions/does-not-exist");
  REQUIRE(r);
  CHECK(r->status == 404);
  CHECK(body_of(r)["code"] == "not-found");

  r = live.post(base + "/analyze", json::object());
  CHECK(r->status == 409);
  CHECK(body_of(r)["code"] == "invalid-transition");

  r = live.post(base + "/generate", json::object());
  CHECK(r->status == 200);
  r = live.post(base + "/curate", {{"decisions", {{"ghost", "selected"}}}});
  CHECK(r->status == 422);
  CHECK(body_of(r)["code"] == "unknown-objective");

  r = live.post(base + "/curate", {{"decisions", {{"ghost", "maybe"}}}});
  CHECK(r->status == 400);

  r = live.post(base + "/analyze", json::object());
  CHECK(r->status == 422);
  CHECK(body_of(r)["message"].get<std::string>().find("select at least one objective") != std::string::npos);

  r = live.client->Get(base + "/report");
  CHECK(r->status == 422);

  r = live.client->Post(base + "/generate", "{not json", "application/json");
  CHECK(r->status == 400);

  r = live.post("/api/sessions", {{"title", "x"}, {"spec", {{"subject", "s"}}}});
  CHECK(r->status >= 400);
  CHECK(r->status < 500);
}

TEST_CASE("expected_version guards against stale writes") {
  LiveService live;
  const auto id = create_session(live);
  const std::string base = "/api/sessions/" + id;
  const auto current = body_of(live.client->Get(base))["version"].get<std::uint64_t>();
  auto r = live.post(base + "/generate", {{"expected_version", current + 5}});
  CHECK(r->status == 409);
  CHECK(body_of(r)["code"] == "conflict");
  r = live.post(base + "/generate", {{"expected_version", current}});
  CHECK(r->status == 200);
}

TEST_CASE("spec update and regeneration over HTTP") {
  LiveService live;
  const auto id = create_session(live);
  const std::string base = "/api/sessions/" + id;
  auto spec = testgen::flow_spec();
  spec["target_levels"] = {"Evaluate"};
  auto r = live.client->Patch(base + "/spec", json{{"spec", spec}}.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  auto s = body_of(live.post(base + "/generate", json::object()));
  const std::string keep = s["batches"][0]["objectives"][0]["id"];
  r = live.post(base + "/regenerate", {{"feedback", "shorter please"}, {"keep", {keep}}});
  CHECK(r->status == 200);
  s = body_of(r);
  CHECK(s["batches"].size() == 2);
  CHECK(s["batches"][1]["objectives"][0]["id"] == keep);
}

TEST_CASE("report downloads") {
  LiveService live;
  const auto id = create_session(live);
  const std::string base = "/api/sessions/" + id;
  auto s = body_of(live.post(base + "/generate", json::object()));
  json decisions = json::object();
  for (const auto& o : s["batches"][0]["objectives"]) decisions[o["id"].get<std::string>()] = "selected";
  live.post(base + "/curate", {{"decisions", decisions}});
  s = body_of(live.post(base + "/analyze", json::object()));

  auto r = live.client->Get(base + "/report?format=json");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Content-Disposition").find(id + "-report.json") != std::string::npos);
  CHECK(json::parse(r->body) == s["reports"].back());

  r = live.client->Get(base + "/report?format=markdown");
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Content-Type").find("text/markdown") == 0);
  CHECK(r->body == render_report(s["reports"].back().get<AnalysisReport>(), ReportFormat::markdown));

  r = live.client->Get(base + "/report?format=pdf");
  CHECK(r->status == 400);
}

TEST_CASE("import endpoint") {
  LiveService live;
  auto r = live.post("/api/import", {{"format", "csv"}, {"payload", "text,declared_level\n\"Students will list x\",Remember\n"}});
  REQUIRE(r);
  CHECK(r->status == 200);
  const auto set = body_of(r)["set"];
  CHECK(set["objectives"].size() == 1);

  r = live.post("/api/import", {{"format", "csv"}, {"payload", "text\n\"unterminated\n"}});
  CHECK(r->status == 422);
  const auto err = body_of(r);
  CHECK(err["code"] == "import-malformed");
  CHECK(err["message"].get<std::string>().find("row 2") != std::string::npos);

  r = live.post("/api/import", {{"format", "xml"}, {"payload", ""}});
  CHECK(r->status == 400);

  const auto id = create_session(live);
  r = live.post("/api/import", {{"format", "json"},
                                {"payload", R"([{"text":"Students will list the planets"}])"},
                                {"session_id", id}});
  CHECK(r->status == 200);
  CHECK(body_of(r)["state"] == "Review");
}

TEST_CASE("corpus evaluation endpoint") {
  LiveService live;
  const auto corpus = make_synthetic_corpus(120, 0.85, 42);
  auto r = live.post("/api/eval/corpus", {{"payload", format_corpus_csv(corpus)}, {"resamples", 500}, {"seed", 42}});
  REQUIRE(r);
  CHECK(r->status == 200);
  const auto j = body_of(r);
  const auto expected = evaluate_corpus(corpus, nullptr, 500, 42);
  CHECK(j["kappa_line"] == format_kappa_line(expected.kappa));

  r = live.post("/api/eval/corpus", {{"payload", "id,text,expert_level,system_level\n1,x,Remember,Remember\n2,y,Remember,Remember\n"}});
  CHECK(r->status == 422);
  CHECK(body_of(r)["code"] == "invalid-input");
}

TEST_CASE("CORS allowlist") {
  api::ServerConfig cfg;
  cfg.cors_origins = {"http://localhost:5173"};
  LiveService live(cfg);
  auto r = live.client->Get("/api/health", {{"Origin", "http://localhost:5173"}});
  REQUIRE(r);
  CHECK(r->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  r = live.client->Get("/api/health", {{"Origin", "http://evil.example"}});
  CHECK_FALSE(r->has_header("Access-Control-Allow-Origin"));
  r = live.client->Options("/api/sessions", {{"Origin", "http://localhost:5173"}});
  REQUIRE(r);
  CHECK(r->status == 204);
}

TEST_CASE("busy port is reported") {
  LiveService first;
  api::ServerConfig cfg;
  cfg.port = first.service->port();
  cfg.data_dir = first.data.path;
  api::Service second(cfg);
  try {
    second.start();
    FAIL("expected the bind to fail");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_input);
    CHECK(std::string(e.what()).find("port busy") != std::string::npos);
  }
}

TEST_CASE("configuration layering") {
  testgen::TempDataDir tmp;
  const auto file = tmp.path / "arched.json";
  std::ofstream(file) << R"({"host":"0.0.0.0","port":9000,"data_dir":"/tmp/x","cors_origins":["http://a"],)"
                      << R"("llm":{"backend":"stub","model":"m1","max_in_flight":2,"api_key":"sk-should-not-load"}})";
  auto cfg = api::ServerConfig::from_file(file, {});
  CHECK(cfg.host == "0.0.0.0");
  CHECK(cfg.port == 9000);
  CHECK(cfg.cors_origins == std::vector<std::string>{"http://a"});
  CHECK(cfg.backend.model_default == "m1");
  CHECK(cfg.backend.max_in_flight == 2);
  CHECK(cfg.backend.api_key.empty());

  ::setenv("ARCHED_PORT", "9100", 1);
  ::setenv("ARCHED_CORS_ORIGINS", "http://b, http://c", 1);
  cfg = api::ServerConfig::from_env(cfg);
  ::unsetenv("ARCHED_PORT");
  ::unsetenv("ARCHED_CORS_ORIGINS");
  CHECK(cfg.port == 9100);
  CHECK(cfg.host == "0.0.0.0");
  CHECK(cfg.cors_origins == std::vector<std::string>{"http://b", "http://c"});

  std::ofstream(file) << "[1,2]";
  CHECK_THROWS_AS(api::ServerConfig::from_file(file, {}), Error);
  api::ServerConfig bad;
  bad.port = 70000;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("concurrent curation requests on one session") {
  LiveService live;
  const auto id = create_session(live);
  const std::string base = "/api/sessions/" + id;
  auto s = body_of(live.post(base + "/generate", json::object()));
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (const auto& o : s["batches"][0]["objectives"]) {
    threads.emplace_back([&, oid = o["id"].get<std::string>()] {
      httplib::Client c("127.0.0.1", live.service->port());
      auto r = c.Post(base + "/curate", json{{"decisions", {{oid, "selected"}}}}.dump(), "application/json");
      if (r && r->status == 200) ++ok;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 6);
  CHECK(body_of(live.client->Get(base))["working_set"]["objectives"].size() == 6);
}
