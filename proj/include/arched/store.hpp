#pragma once

#include "arched/session.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

namespace arched {

// One JSON file per session under <data_dir>/sessions/.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path data_dir);

  // Writes the session if its version matches the stored one (0 for a new
  // session) and returns it with the bumped version. A stale version throws
  // conflict.
  Session save(Session s);
  Session load(const std::string& id) const;
  bool exists(const std::string& id) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& id) const;

  std::filesystem::path dir_;
  std::mutex write_mutex_;
};

bool valid_session_id(std::string_view id);

// Serializes operations per session id; distinct sessions run concurrently.
class SessionService {
 public:
  SessionService(SessionStore& store, SessionEngines engines);

  Session create(const std::string& title, const GenerationSpec& spec);
  Session get(const std::string& id) const;

  // load -> op -> save under the session's lock.
  Session mutate(const std::string& id, const std::function<Session(Session, const SessionEngines&)>& op);

  const SessionEngines& engines() const { return engines_; }

 private:
  std::mutex& lock_for(const std::string& id);

  SessionStore& store_;
  SessionEngines engines_;
  std::mutex locks_mutex_;
  std::unordered_map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace arched
