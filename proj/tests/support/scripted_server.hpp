#pragma once

// Local HTTP server replaying a fixed script of chat-completion responses.

#include <httplib.h>

#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace testgen {

struct ScriptedReply {
  int status = 200;
  std::string body;
  int delay_ms = 0;
};

inline std::string completion_body(const std::string& content, const std::string& model = "fixture-model") {
  return nlohmann::json{{"model", model},
                        {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}},
                        {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 7}}}}
      .dump();
}

class ScriptedServer {
 public:
  explicit ScriptedServer(std::vector<ScriptedReply> script, std::string path = "/v1/chat/completions")
      : script_(std::move(script)) {
    server_.Post(path, [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t i;
      {
        std::lock_guard lock(mutex_);
        requests_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
        i = std::min(hits_++, script_.size() - 1);
      }
      const auto& r = script_[i];
      if (r.delay_ms) std::this_thread::sleep_for(std::chrono::milliseconds(r.delay_ms));
      res.status = r.status;
      res.set_content(r.body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
  }
  std::vector<std::string> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  std::vector<std::string> auth_headers() const {
    std::lock_guard lock(mutex_);
    return auth_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::vector<ScriptedReply> script_;
  mutable std::mutex mutex_;
  std::size_t hits_ = 0;
  std::vector<std::string> requests_;
  std::vector<std::string> auth_;
};

}  // namespace testgen
