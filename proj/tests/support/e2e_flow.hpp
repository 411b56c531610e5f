#pragma once

// The full session flow over HTTP against a stub-backed service.

#include "arched/api.hpp"
#include "arched/bloom.hpp"
#include "arched/llm.hpp"
#include "arched/util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace testgen {

struct FlowCheck {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct TempDataDir {
  std::filesystem::path path;
  TempDataDir() {
    path = std::filesystem::temp_directory_path() / ("arched-flow-" + arched::random_id(""));
    std::filesystem::create_directories(path);
  }
  ~TempDataDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// Service on an ephemeral loopback port with a throwaway data directory.
struct LiveService {
  TempDataDir data;
  std::unique_ptr<arched::api::Service> service;
  std::unique_ptr<httplib::Client> client;

  explicit LiveService(arched::api::ServerConfig config = {}) {
    config.host = "127.0.0.1";
    config.port = 0;
    config.data_dir = data.path;
    service = std::make_unique<arched::api::Service>(std::move(config));
    service->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", service->port());
    client->set_read_timeout(30, 0);
  }
  ~LiveService() { service->stop(); }

  httplib::Result post(const std::string& path, const nlohmann::json& body) {
    return client->Post(path, body.dump(), "application/json");
  }
};

inline nlohmann::json flow_spec() {
  return {{"subject", "Computer Science"},
          {"topic", "linked lists"},
          {"grade_level", "undergraduate-intro"},
          {"target_levels", {"Remember", "Apply", "Create"}},
          {"count_per_level", 2}};
}

// Runs create -> generate -> curate -> analyze -> assessments -> finalize ->
// report with the stub backend taken from the environment.
inline std::vector<FlowCheck> run_offline_flow() {
  using nlohmann::json;
  std::vector<FlowCheck> checks;
  const auto check = [&](std::string name, bool ok, std::string detail = {}) {
    checks.push_back({std::move(name), ok, std::move(detail)});
    return ok;
  };

  ::setenv("ARCHED_LLM_BACKEND", "stub", 1);
  const auto config = arched::api::ServerConfig::from_env({});
  const auto egress_before = arched::llm::outbound_http_attempts();
  LiveService live(config);

  const auto step = [&](const std::string& name, const httplib::Result& r, json* out = nullptr) {
    if (!r) return check(name + " responds", false, "transport error");
    const bool ok = r->status >= 200 && r->status < 300;
    if (ok && out) *out = json::parse(r->body, nullptr, false);
    return check(name + " is 2xx", ok, std::to_string(r->status) + " " + r->body.substr(0, 200));
  };

  json health, session;
  if (!step("health", live.client->Get("/api/health"), &health)) return checks;
  check("backend is the stub", health["backend"]["kind"] == "stub", health.dump());

  if (!step("create", live.post("/api/sessions", {{"title", "Linked lists"}, {"spec", flow_spec()}}), &session)) {
    return checks;
  }
  const std::string base = "/api/sessions/" + session["id"].get<std::string>();
  if (!step("generate", live.post(base + "/generate", json::object()), &session)) return checks;

  bool aligned = true;
  json decisions = json::object();
  std::size_t selected = 0;
  std::size_t generated = 0;
  for (const auto& o : session["batches"][0]["objectives"]) {
    ++generated;
    const auto declared = arched::parse_level(o["declared_level"].get<std::string>());
    const auto verb = arched::classify_by_verb(o["text"].get<std::string>());
    if (!declared || verb != declared) aligned = false;
    // Select every other objective.
    const bool take = generated % 2 == 1;
    decisions[o["id"].get<std::string>()] = take ? "selected" : "rejected";
    selected += take;
  }
  check("six objectives generated", generated == 6, std::to_string(generated));
  check("every generated verb matches its declared level", aligned);

  if (!step("curate", live.post(base + "/curate", {{"decisions", decisions}}), &session)) return checks;
  check("working set holds the selection", session["working_set"]["objectives"].size() == selected);
  if (!step("analyze", live.post(base + "/analyze", json::object()), &session)) return checks;
  long total = 0;
  for (const auto& c : session["reports"].back()["distribution"]) total += c.get<long>();
  check("distribution sums to the selected count", total == static_cast<long>(selected),
        std::to_string(total) + " vs " + std::to_string(selected));

  if (!step("assessments", live.post(base + "/assessments", {{"per_objective", 1}}), &session)) return checks;
  check("one assessment per selected objective", session["assessments"].size() == selected);
  if (!step("finalize", live.post(base + "/finalize", json::object()), &session)) return checks;
  check("session finalized", session["state"] == "Finalized");

  json ignored;
  auto md = live.client->Get(base + "/report?format=markdown");
  if (step("markdown report", md)) {
    check("report has the distribution table", md->body.find("| Level | Count |") != std::string::npos);
    check("report has gap callouts", md->body.find("Coverage gaps: Understand, Analyze, Evaluate") != std::string::npos);
  }
  step("json report", live.client->Get(base + "/report?format=json"), &ignored);
  check("no outbound HTTP", arched::llm::outbound_http_attempts() == egress_before);
  ::unsetenv("ARCHED_LLM_BACKEND");
  return checks;
}

}  // namespace testgen
