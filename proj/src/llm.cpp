#include "arched/llm.hpp"

#include "arched/error.hpp"
#include "arched/log.hpp"
#include "arched/util.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

namespace arched::llm {

namespace {

std::atomic<std::uint64_t> g_outbound_attempts{0};

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? std::string(v) : std::move(fallback);
}

std::string excerpt(std::string_view body, std::size_t max = 300) {
  return truncate_with_marker(body, max);
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(BackendKind kind) { return kind == BackendKind::http ? "http" : "stub"; }

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
  const auto lowered = to_lower(trim(s));
  if (lowered == "http") return BackendKind::http;
  if (lowered == "stub") return BackendKind::stub;
  return std::nullopt;
}

void ChatRequest::validate() const {
  if (messages.empty()) throw Error(ErrorCode::invalid_input, "chat request needs at least one message");
  if (messages.front().role != Role::system) {
    throw Error(ErrorCode::invalid_input, "first chat message must have the system role");
  }
  if (temperature < 0.0) throw Error(ErrorCode::invalid_input, "temperature must be >= 0");
}

nlohmann::json ChatRequest::to_wire(const std::string& default_model) const {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  nlohmann::json body{{"model", model.empty() ? default_model : model},
                      {"messages", msgs},
                      {"temperature", temperature},
                      {"max_tokens", max_tokens}};
  if (seed_hint) body["seed"] = *seed_hint;
  return body;
}

void BackendConfig::validate() const {
  if (kind == BackendKind::http && trim(base_url).empty()) {
    throw Error(ErrorCode::invalid_input, "http backend requires base_url");
  }
  if (max_in_flight < 1) throw Error(ErrorCode::invalid_input, "max_in_flight must be >= 1");
  if (max_retries < 0) throw Error(ErrorCode::invalid_input, "max_retries must be >= 0");
}

BackendConfig BackendConfig::from_env(BackendConfig base) {
  if (const char* k = std::getenv("ARCHED_LLM_BACKEND"); k && *k) {
    const auto kind = parse_backend_kind(k);
    if (!kind) throw Error(ErrorCode::invalid_input, std::string("ARCHED_LLM_BACKEND must be http or stub, got ") + k);
    base.kind = *kind;
  }
  base.base_url = env_or("ARCHED_LLM_BASE_URL", base.base_url);
  base.api_key = env_or("ARCHED_LLM_API_KEY", base.api_key);
  base.model_default = env_or("ARCHED_LLM_MODEL", base.model_default);
  return base;
}

BackendConfig BackendConfig::from_env() { return from_env(BackendConfig{}); }

nlohmann::json BackendConfig::redacted() const {
  return {{"kind", to_string(kind)},
          {"base_url", base_url},
          {"api_key_set", !api_key.empty()},
          {"model", model_default},
          {"timeout_ms", timeout_ms},
          {"max_retries", max_retries},
          {"max_in_flight", max_in_flight}};
}

// --- HTTP -------------------------------------------------------------------

std::uint64_t outbound_http_attempts() { return g_outbound_attempts.load(); }

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  const auto path_begin = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_begin);
  path_prefix_ = path_begin == std::string::npos ? "" : url.substr(path_begin);
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  request.validate();
  const std::string path = path_prefix_ + "/v1/chat/completions";
  const std::string body = request.to_wire(config_.model_default).dump();
  httplib::Headers headers = {{"Accept", "application/json"}};
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::mt19937_64 jitter_rng(mix64(fnv1a64(body)));
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  const auto started = std::chrono::steady_clock::now();

  std::string last_problem;
  bool last_was_timeout = false;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = config_.backoff_base_ms * std::pow(2.0, attempt - 1) * jitter(jitter_rng);
      log::info("llm retry " + std::to_string(attempt) + " after " + last_problem);
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
    }
    httplib::Client client(scheme_host_port_);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    ++g_outbound_attempts;
    log::debug("llm POST " + scheme_host_port_ + path + " model=" +
               (request.model.empty() ? config_.model_default : request.model));
    const auto attempt_start = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const auto elapsed = std::chrono::steady_clock::now() - attempt_start;
      last_was_timeout = err == httplib::Error::ConnectionTimeout ||
                         (err == httplib::Error::Read && elapsed >= timeout * 9 / 10);
      last_problem = "transport error: " + httplib::to_string(err);
      continue;
    }
    last_was_timeout = false;
    const int status = res->status;
    if (status == 429 || status >= 500) {
      last_problem = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(ErrorCode::backend_request, "model backend rejected the request with HTTP " + std::to_string(status),
                  {{"status", status}, {"body", excerpt(res->body)}});
    }
    const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content") ||
        !parsed["choices"][0]["message"]["content"].is_string()) {
      throw Error(ErrorCode::backend_protocol, "malformed chat-completion response",
                  {{"body", excerpt(res->body)}});
    }
    ChatResponse out;
    out.content = parsed["choices"][0]["message"]["content"].get<std::string>();
    out.model = parsed.value("model", request.model.empty() ? config_.model_default : request.model);
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
      out.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
      out.usage.completion_tokens = parsed["usage"].value("completion_tokens", 0);
    }
    out.backend = BackendKind::http;
    out.retry_count = attempt;
    out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return out;
  }
  if (last_was_timeout) {
    throw Error(ErrorCode::backend_timeout, "model backend timed out after " +
                                                std::to_string(config_.max_retries) + " retries");
  }
  throw Error(ErrorCode::backend_unavailable,
              "model backend unavailable after " + std::to_string(config_.max_retries) + " retries (" +
                  last_problem + ")");
}

// --- limiter / gateway -----------------------------------------------------

InFlightLimiter::InFlightLimiter(int capacity) : capacity_(capacity < 1 ? 1 : capacity) {}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  const std::uint64_t ticket = next_ticket_++;
  cv_.wait(lock, [&] { return ticket == serving_ && in_flight_ < capacity_; });
  ++serving_;
  ++in_flight_;
  int peak = peak_.load();
  while (in_flight_ > peak && !peak_.compare_exchange_weak(peak, in_flight_)) {
  }
  cv_.notify_all();
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_all();
}

namespace {

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
  config.validate();
  if (config.kind == BackendKind::http) return std::make_unique<HttpBackend>(config);
  return std::make_unique<StubBackend>(config.model_default);
}

}  // namespace

Gateway::Gateway(BackendConfig config) : Gateway(config, make_backend(config)) {}

Gateway::Gateway(BackendConfig config, std::unique_ptr<ChatBackend> backend)
    : config_(std::move(config)), backend_(std::move(backend)), limiter_(config_.max_in_flight) {}

ChatResponse Gateway::complete(const ChatRequest& request) {
  request.validate();
  limiter_.acquire();
  struct Release {
    InFlightLimiter& l;
    ~Release() { l.release(); }
  } release{limiter_};
  return backend_->complete(request);
}

// --- structured output -----------------------------------------------------

StructuredResult complete_structured(Gateway& gateway, ChatRequest request, const Schema& schema) {
  StructuredResult result;
  std::string violation;
  for (int attempt = 1; attempt <= k_structured_attempts; ++attempt) {
    result.last = gateway.complete(request);
    result.attempts = attempt;
    result.raw_responses.push_back(result.last.content);
    const auto block = extract_json_block(result.last.content);
    if (!block) {
      violation = "no JSON object found in the answer";
    } else if (auto v = validate(*block, schema)) {
      violation = *v;
    } else {
      result.value = *block;
      return result;
    }
    request.messages.push_back({Role::assistant, result.last.content});
    request.messages.push_back(
        {Role::user, "Your previous answer did not match the required shape: " + violation +
                         ". Reply again with only the corrected JSON object."});
  }
  throw Error(ErrorCode::validation_exhausted,
              "model output failed validation after " + std::to_string(k_structured_attempts) +
                  " attempts: " + violation,
              {{"violation", violation}, {"raw_responses", result.raw_responses}});
}

}  // namespace arched::llm
