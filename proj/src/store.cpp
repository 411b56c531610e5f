#include "arched/store.hpp"

#include "arched/error.hpp"
#include "arched/util.hpp"

#include <fstream>

namespace arched {

namespace fs = std::filesystem;

bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

SessionStore::SessionStore(fs::path data_dir) : dir_(std::move(data_dir) / "sessions") {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::internal, "cannot create data directory " + dir_.string() + ": " + ec.message());
}

fs::path SessionStore::path_for(const std::string& id) const {
  if (!valid_session_id(id)) throw Error(ErrorCode::not_found, "no session '" + id + "'", {{"id", id}});
  return dir_ / (id + ".json");
}

bool SessionStore::exists(const std::string& id) const {
  return valid_session_id(id) && fs::exists(path_for(id));
}

Session SessionStore::load(const std::string& id) const {
  const auto path = path_for(id);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "no session '" + id + "'", {{"id", id}});
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::internal, "session file " + path.string() + " is corrupt: " + e.what());
  }
  return j.get<Session>();
}

Session SessionStore::save(Session s) {
  const auto path = path_for(s.id);
  std::lock_guard lock(write_mutex_);
  std::uint64_t stored = 0;
  if (fs::exists(path)) stored = load(s.id).version;
  if (stored != s.version) {
    throw Error(ErrorCode::conflict, "session '" + s.id + "' was modified concurrently",
                {{"expected_version", s.version}, {"stored_version", stored}});
  }
  s.version = stored + 1;
  const auto tmp = path.string() + ".tmp";
  write_file(tmp, nlohmann::json(s).dump(2) + "\n");
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::internal, "cannot write session file: " + ec.message());
  return s;
}

SessionService::SessionService(SessionStore& store, SessionEngines engines)
    : store_(store), engines_(std::move(engines)) {}

std::mutex& SessionService::lock_for(const std::string& id) {
  std::lock_guard lock(locks_mutex_);
  auto& slot = locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

Session SessionService::create(const std::string& title, const GenerationSpec& spec) {
  return store_.save(workflow::create_session(title, spec, engines_));
}

Session SessionService::get(const std::string& id) const { return store_.load(id); }

Session SessionService::mutate(const std::string& id,
                               const std::function<Session(Session, const SessionEngines&)>& op) {
  std::lock_guard lock(lock_for(id));
  return store_.save(op(store_.load(id), engines_));
}

}  // namespace arched
