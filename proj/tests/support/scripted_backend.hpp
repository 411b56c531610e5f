#pragma once

// In-process backend replaying canned contents (last one repeats).

#include "arched/error.hpp"
#include "arched/llm.hpp"

#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace testgen {

class ScriptedBackend final : public arched::llm::ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> contents) : contents_(std::move(contents)) {}

  // Every call fails with this code instead.
  static std::unique_ptr<ScriptedBackend> failing(arched::ErrorCode code) {
    auto b = std::make_unique<ScriptedBackend>(std::vector<std::string>{""});
    b->failure_ = code;
    return b;
  }

  arched::llm::ChatResponse complete(const arched::llm::ChatRequest& request) override {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    if (failure_) throw arched::Error(*failure_, "scripted failure");
    const auto& c = contents_[std::min(calls_++, contents_.size() - 1)];
    return arched::llm::ChatResponse{c, "scripted", {}, arched::llm::BackendKind::stub, 0.0, 0};
  }
  arched::llm::BackendKind kind() const override { return arched::llm::BackendKind::stub; }

  std::vector<arched::llm::ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  std::vector<std::string> contents_;
  std::optional<arched::ErrorCode> failure_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
  std::vector<arched::llm::ChatRequest> requests_;
};

}  // namespace testgen
