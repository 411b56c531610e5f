#pragma once

#include "arched/schema.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace arched::llm {

enum class Role { system, user, assistant };
std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::user;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;  // empty: backend default
  std::vector<ChatMessage> messages;
  double temperature = 0.2;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed_hint;

  // Throws invalid-input unless messages are non-empty and start with system.
  void validate() const;
  // OpenAI-compatible request body.
  nlohmann::json to_wire(const std::string& default_model) const;
};

enum class BackendKind { http, stub };
std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatResponse {
  std::string content;
  std::string model;
  Usage usage;
  BackendKind backend = BackendKind::stub;
  double latency_ms = 0.0;
  int retry_count = 0;
};

inline constexpr std::string_view k_default_model = "gpt-4o-mini-2024-07-18";

struct BackendConfig {
  BackendKind kind = BackendKind::stub;
  std::string base_url;
  std::string api_key;
  std::string model_default = std::string(k_default_model);
  int timeout_ms = 60000;
  int max_retries = 3;
  int max_in_flight = 4;
  int backoff_base_ms = 500;

  // Throws invalid-input when kind is http without base_url.
  void validate() const;

  // Reads ARCHED_LLM_BACKEND, ARCHED_LLM_BASE_URL, ARCHED_LLM_API_KEY and
  // ARCHED_LLM_MODEL on top of `base`.
  static BackendConfig from_env(BackendConfig base);
  static BackendConfig from_env();

  // Safe-to-display view: the api key is reduced to a presence flag.
  nlohmann::json redacted() const;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual BackendKind kind() const = 0;
};

// OpenAI-compatible HTTP backend with retry on transport errors, 429 and
// 5xx (exponential backoff, factor 2, +/-20% jitter).
class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(BackendConfig config);
  ChatResponse complete(const ChatRequest& request) override;
  BackendKind kind() const override { return BackendKind::http; }

 private:
  BackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

// Number of outbound HTTP attempts made by any HttpBackend in this process.
std::uint64_t outbound_http_attempts();

// Offline backend: a pure function of (messages, model, temperature).
// Dispatches on the engine marker tag in the system message.
class StubBackend final : public ChatBackend {
 public:
  explicit StubBackend(std::string model_default = std::string(k_default_model));
  ChatResponse complete(const ChatRequest& request) override;
  BackendKind kind() const override { return BackendKind::stub; }

  static std::uint64_t request_hash(const ChatRequest& request, std::string_view model);
  static std::string content_for(const ChatRequest& request, std::string_view model);

 private:
  std::string model_default_;
};

// FIFO counting semaphore bounding concurrent backend calls.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int capacity);
  void acquire();
  void release();
  int peak() const { return peak_.load(); }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int capacity_;
  int in_flight_ = 0;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t serving_ = 0;
  std::atomic<int> peak_{0};
};

// Shared handle to one configured backend.
class Gateway {
 public:
  explicit Gateway(BackendConfig config);
  Gateway(BackendConfig config, std::unique_ptr<ChatBackend> backend);

  ChatResponse complete(const ChatRequest& request);

  const BackendConfig& config() const { return config_; }
  BackendKind kind() const { return backend_->kind(); }
  int peak_in_flight() const { return limiter_.peak(); }

 private:
  BackendConfig config_;
  std::unique_ptr<ChatBackend> backend_;
  InFlightLimiter limiter_;
};

struct StructuredResult {
  nlohmann::json value;
  std::vector<std::string> raw_responses;
  int attempts = 0;
  ChatResponse last;
};

inline constexpr int k_structured_attempts = 2;

// Calls the gateway, extracts the first JSON block and validates it. On a
// violation, re-prompts once quoting the problem; after two failed attempts
// throws validation-exhausted carrying both raw responses.
StructuredResult complete_structured(Gateway& gateway, ChatRequest request, const Schema& schema);

}  // namespace arched::llm
