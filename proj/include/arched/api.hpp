#pragma once

#include "arched/error.hpp"
#include "arched/llm.hpp"
#include "arched/store.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace arched::api {

inline constexpr std::string_view k_api_version = "1";

// The one HTTP status for each domain error code.
int status_for(ErrorCode code);

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "arched-data";
  std::vector<std::string> cors_origins;
  std::optional<std::filesystem::path> ui_dir;
  llm::BackendConfig backend;

  void validate() const;

  // Keys: host, port, data_dir, cors_origins, ui_dir, and an "llm" object
  // with backend, base_url, model, timeout_ms, max_retries, max_in_flight.
  // The API key is never read from the file.
  static ServerConfig from_file(const std::filesystem::path& path, ServerConfig base);
  // ARCHED_HOST, ARCHED_PORT, ARCHED_DATA_DIR, ARCHED_CORS_ORIGINS (comma
  // separated), ARCHED_UI_DIR and the ARCHED_LLM_* variables.
  static ServerConfig from_env(ServerConfig base);
};

class Service {
 public:
  // backend overrides the one described by config.backend (tests).
  explicit Service(ServerConfig config, std::unique_ptr<llm::ChatBackend> backend = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the configured port (0 picks a free one) and serves on a
  // background thread. A busy port throws invalid-input.
  void start();
  int port() const;
  // Stops accepting connections and waits for in-flight requests.
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

  const ServerConfig& config() const;
  SessionService& sessions();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace arched::api
