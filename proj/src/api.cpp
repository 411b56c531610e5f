#include "arched/api.hpp"

#include "arched/assess.hpp"
#include "arched/evalstats.hpp"
#include "arched/json_util.hpp"
#include "arched/log.hpp"
#include "arched/logs.hpp"
#include "arched/oae.hpp"
#include "arched/util.hpp"

#include <httplib.h>
#include <sys/socket.h>

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace arched::api {

using nlohmann::json;

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::bad_request: return 400;
    case ErrorCode::invalid_input: return 422;
    case ErrorCode::invalid_transition: return 409;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::precondition: return 422;
    case ErrorCode::unknown_objective: return 422;
    case ErrorCode::import_malformed: return 422;
    case ErrorCode::generation_empty: return 422;
    case ErrorCode::degenerate_marginals: return 422;
    case ErrorCode::unstable_estimate: return 422;
    case ErrorCode::validation_exhausted: return 502;
    case ErrorCode::backend_request: return 502;
    case ErrorCode::backend_protocol: return 502;
    case ErrorCode::backend_timeout: return 504;
    case ErrorCode::backend_unavailable: return 503;
    case ErrorCode::internal: return 500;
  }
  return 500;
}

// --- config -------------------------------------------------------------------

void ServerConfig::validate() const {
  if (port < 0 || port > 65535) throw Error(ErrorCode::invalid_input, "port must be in 0..65535");
  if (host.empty()) throw Error(ErrorCode::invalid_input, "host must not be empty");
  if (data_dir.empty()) throw Error(ErrorCode::invalid_input, "data directory must not be empty");
  backend.validate();
}

ServerConfig ServerConfig::from_file(const std::filesystem::path& path, ServerConfig base) {
  json j;
  try {
    j = json::parse(read_file(path.string()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_input, "config file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::invalid_input, "config file must hold a JSON object");
  try {
    if (j.contains("host")) base.host = j.at("host").get<std::string>();
    if (j.contains("port")) base.port = j.at("port").get<int>();
    if (j.contains("data_dir")) base.data_dir = j.at("data_dir").get<std::string>();
    if (j.contains("cors_origins")) base.cors_origins = j.at("cors_origins").get<std::vector<std::string>>();
    if (j.contains("ui_dir")) base.ui_dir = j.at("ui_dir").get<std::string>();
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      if (l.contains("backend")) {
        const auto kind = llm::parse_backend_kind(l.at("backend").get<std::string>());
        if (!kind) throw Error(ErrorCode::invalid_input, "llm.backend must be http or stub");
        base.backend.kind = *kind;
      }
      if (l.contains("base_url")) base.backend.base_url = l.at("base_url").get<std::string>();
      if (l.contains("model")) base.backend.model_default = l.at("model").get<std::string>();
      if (l.contains("timeout_ms")) base.backend.timeout_ms = l.at("timeout_ms").get<int>();
      if (l.contains("max_retries")) base.backend.max_retries = l.at("max_retries").get<int>();
      if (l.contains("max_in_flight")) base.backend.max_in_flight = l.at("max_in_flight").get<int>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_input, std::string("config file has a mistyped key: ") + e.what());
  }
  return base;
}

ServerConfig ServerConfig::from_env(ServerConfig base) {
  const auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("ARCHED_HOST")) base.host = *v;
  if (auto v = env("ARCHED_PORT")) {
    try {
      base.port = std::stoi(*v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_input, "ARCHED_PORT must be an integer");
    }
  }
  if (auto v = env("ARCHED_DATA_DIR")) base.data_dir = *v;
  if (auto v = env("ARCHED_UI_DIR")) base.ui_dir = *v;
  if (auto v = env("ARCHED_CORS_ORIGINS")) {
    base.cors_origins.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (auto t = trim(item); !t.empty()) base.cors_origins.push_back(t);
    }
  }
  base.backend = llm::BackendConfig::from_env(base.backend);
  return base;
}

// --- service ------------------------------------------------------------------

namespace {

constexpr const char* k_json = "application/json";

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", k_json);
}

void send_error(httplib::Response& res, const Error& e) {
  json body{{"code", to_string(e.code())}, {"message", e.what()}};
  if (!e.detail().is_null()) body["detail"] = e.detail();
  send_json(res, status_for(e.code()), body);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::bad_request, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::bad_request, std::string("request body is not valid JSON: ") + e.what());
  }
}

}  // namespace

struct Service::Impl {
  ServerConfig config;
  llm::Gateway gateway;
  LogsEngine logs;
  OaeEngine oae;
  AssessmentDrafter drafter;
  SessionStore store;
  SessionService sessions;
  httplib::Server server;
  std::thread thread;
  int bound_port = 0;
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;

  Impl(ServerConfig cfg, std::unique_ptr<llm::ChatBackend> backend)
      : config(std::move(cfg)),
        gateway(backend ? llm::Gateway(config.backend, std::move(backend)) : llm::Gateway(config.backend)),
        logs(gateway),
        oae(gateway),
        drafter(gateway),
        store(config.data_dir),
        sessions(store, SessionEngines{&logs, &oae, &drafter, system_clock()}) {
    routes();
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  // Wraps a handler with the error mapping.
  static httplib::Server::Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::internal) {
          const auto incident = random_id("inc-");
          log::error(std::string("incident ") + incident + ": " + e.what());
          send_json(res, 500, {{"code", "internal"}, {"message", "internal error"}, {"incident", incident}});
        } else {
          send_error(res, e);
        }
      } catch (const json::exception& e) {
        send_error(res, Error(ErrorCode::bad_request, std::string("malformed request field: ") + e.what()));
      } catch (const std::exception& e) {
        const auto incident = random_id("inc-");
        log::error(std::string("incident ") + incident + ": " + e.what());
        send_json(res, 500, {{"code", "internal"}, {"message", "internal error"}, {"incident", incident}});
      }
    };
  }

  // Session mutation with an optional expected_version guard from the body.
  Session mutate(const std::string& id, const json& body,
                 const std::function<Session(Session, const SessionEngines&)>& op) {
    std::optional<std::uint64_t> expected;
    if (body.contains("expected_version")) expected = body.at("expected_version").get<std::uint64_t>();
    return sessions.mutate(id, [&](Session s, const SessionEngines& e) {
      if (expected && *expected != s.version) {
        throw Error(ErrorCode::conflict, "session '" + id + "' has changed since version " + std::to_string(*expected),
                    {{"expected_version", *expected}, {"stored_version", s.version}});
      }
      return op(std::move(s), e);
    });
  }

  void action(const std::string& name, std::function<Session(Session, const SessionEngines&, const json&)> op) {
    server.Post("/api/sessions/([A-Za-z0-9_-]+)/" + name,
                guarded([this, op = std::move(op)](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const Session s = mutate(req.matches[1], body, [&](Session cur, const SessionEngines& e) {
                    return op(std::move(cur), e, body);
                  });
                  send_json(res, 200, s);
                }));
  }

  void routes() {
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    server.set_default_headers({{"X-Arched-Api", std::string(k_api_version)}});
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      const auto origin = req.get_header_value("Origin");
      if (!origin.empty() &&
          std::find(config.cors_origins.begin(), config.cors_origins.end(), origin) != config.cors_origins.end()) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
        if (req.method == "OPTIONS") {
          res.set_header("Access-Control-Allow-Methods", "GET, POST, PATCH, OPTIONS");
          res.set_header("Access-Control-Allow-Headers", "Content-Type");
          res.status = 204;
          res.set_content("", "text/plain");
          return httplib::Server::HandlerResponse::Handled;
        }
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) {
        send_json(res, 404, {{"code", "not-found"}, {"message", "no such route"}});
      } else {
        send_json(res, res.status, {{"code", "bad-request"}, {"message", httplib::status_message(res.status)}});
      }
    });
    if (config.ui_dir) {
      if (!server.set_mount_point("/", config.ui_dir->string())) {
        throw Error(ErrorCode::invalid_input, "ui directory " + config.ui_dir->string() + " does not exist");
      }
    }

    server.Get("/api/health", guarded([this](const httplib::Request&, httplib::Response& res) {
                 send_json(res, 200,
                           {{"status", "ok"},
                            {"api_version", k_api_version},
                            {"backend", {{"kind", llm::to_string(gateway.kind())},
                                         {"model", gateway.config().model_default}}}});
               }));

    server.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const auto spec = jsonu::require(body, "spec").get<GenerationSpec>();
                  send_json(res, 201, sessions.create(body.value("title", std::string()), spec));
                }));

    server.Get("/api/sessions/([A-Za-z0-9_-]+)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, sessions.get(req.matches[1]));
               }));

    server.Patch("/api/sessions/([A-Za-z0-9_-]+)/spec",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const json body = parse_body(req);
                   const auto spec = jsonu::require(body, "spec").get<GenerationSpec>();
                   send_json(res, 200, mutate(req.matches[1], body, [&](Session s, const SessionEngines& e) {
                               return workflow::update_spec(std::move(s), spec, e);
                             }));
                 }));

    action("generate", [](Session s, const SessionEngines& e, const json&) {
      return workflow::run_generation(std::move(s), e);
    });
    action("regenerate", [](Session s, const SessionEngines& e, const json& body) {
      const auto feedback = body.value("feedback", std::string());
      const auto keep = body.value("keep", std::vector<std::string>{});
      return workflow::regenerate(std::move(s), feedback, {keep.begin(), keep.end()}, e);
    });
    action("curate", [](Session s, const SessionEngines& e, const json& body) {
      const auto& d = jsonu::require(body, "decisions");
      if (!d.is_object()) throw Error(ErrorCode::bad_request, "decisions must map objective ids to statuses");
      std::map<std::string, Curation> decisions;
      for (const auto& [id, v] : d.items()) {
        const auto c = v.is_string() ? parse_curation(v.get<std::string>()) : std::nullopt;
        if (!c || *c == Curation::pending) {
          throw Error(ErrorCode::bad_request, "decision for '" + id + "' must be selected or rejected");
        }
        decisions[id] = *c;
      }
      return workflow::curate(std::move(s), decisions, e);
    });
    action("analyze", [](Session s, const SessionEngines& e, const json&) {
      return workflow::run_analysis(std::move(s), e);
    });
    action("assessments", [](Session s, const SessionEngines& e, const json& body) {
      return workflow::draft_assessments(std::move(s), body.value("per_objective", 1), e);
    });
    action("finalize", [](Session s, const SessionEngines& e, const json&) {
      return workflow::finalize(std::move(s), e);
    });

    server.Get("/api/sessions/([A-Za-z0-9_-]+)/report",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string fmt = req.has_param("format") ? req.get_param_value("format") : "json";
                 if (fmt != "json" && fmt != "markdown") {
                   throw Error(ErrorCode::bad_request, "format must be json or markdown");
                 }
                 const Session s = sessions.get(req.matches[1]);
                 if (s.reports.empty()) throw Error(ErrorCode::precondition, "run the analysis before downloading a report");
                 const bool md = fmt == "markdown";
                 res.status = 200;
                 res.set_header("Content-Disposition", "attachment; filename=\"" + s.id + "-report." +
                                                           (md ? "md" : "json") + "\"");
                 res.set_content(render_report(s.reports.back(), md ? ReportFormat::markdown : ReportFormat::json),
                                 md ? "text/markdown; charset=utf-8" : k_json);
               }));

    server.Post("/api/import", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const auto format = parse_set_format(jsonu::require_string(body, "format"));
                  if (!format) throw Error(ErrorCode::bad_request, "format must be csv or json");
                  const auto payload = jsonu::require_string(body, "payload");
                  const auto source = jsonu::optional_string(body, "filename").value_or("upload");
                  const ObjectiveSet set = import_set(payload, *format, source, format_timestamp(std::chrono::system_clock::now()));
                  if (const auto sid = jsonu::optional_string(body, "session_id")) {
                    send_json(res, 200, mutate(*sid, body, [&](Session s, const SessionEngines& e) {
                                return workflow::import_objectives(std::move(s), set, e);
                              }));
                  } else {
                    send_json(res, 200, {{"set", set}});
                  }
                }));

    server.Post("/api/eval/corpus", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const auto payload = jsonu::require_string(body, "payload");
                  const int resamples = body.value("resamples", k_default_resamples);
                  const auto seed = body.value("seed", k_default_seed);
                  if (resamples < 1 || resamples > 100000) {
                    throw Error(ErrorCode::invalid_input, "resamples must be in 1..100000");
                  }
                  auto corpus = parse_corpus_csv(payload, body.value("description", std::string("upload")));
                  const auto run = evaluate_corpus(std::move(corpus), &oae, resamples, seed);
                  json out = to_json(run);
                  out["kappa_line"] = format_kappa_line(run.kappa);
                  send_json(res, 200, out);
                }));
  }
};

Service::Service(ServerConfig config, std::unique_ptr<llm::ChatBackend> backend) {
  config.validate();
  impl_ = std::make_unique<Impl>(std::move(config), std::move(backend));
}

Service::~Service() { stop(); }

void Service::start() {
  auto& s = impl_->server;
  if (impl_->config.port == 0) {
    impl_->bound_port = s.bind_to_any_port(impl_->config.host);
  } else if (s.bind_to_port(impl_->config.host, impl_->config.port)) {
    impl_->bound_port = impl_->config.port;
  } else {
    impl_->bound_port = -1;
  }
  if (impl_->bound_port <= 0) {
    throw Error(ErrorCode::invalid_input, "cannot listen on " + impl_->config.host + ":" +
                                              std::to_string(impl_->config.port) + " (port busy or address invalid)");
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  s.wait_until_ready();
  log::info("listening on " + impl_->config.host + ":" + std::to_string(impl_->bound_port) + " with backend " +
            impl_->gateway.config().redacted().dump());
}

int Service::port() const { return impl_->bound_port; }

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stopped = true;
  }
  impl_->stopped_cv.notify_all();
}

void Service::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

const ServerConfig& Service::config() const { return impl_->config; }
SessionService& Service::sessions() { return impl_->sessions; }

}  // namespace arched::api
