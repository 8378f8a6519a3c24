#include "dtwin/run_store.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <random>

#include "dtwin/series_io.hpp"

namespace dtwin {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Queued: return "QUEUED";
    case RunStatus::Running: return "RUNNING";
    case RunStatus::Done: return "DONE";
    case RunStatus::Failed: return "FAILED";
  }
  return "?";
}

RunStatus parse_run_status(const std::string& text) {
  if (text == "QUEUED") return RunStatus::Queued;
  if (text == "RUNNING") return RunStatus::Running;
  if (text == "DONE") return RunStatus::Done;
  if (text == "FAILED") return RunStatus::Failed;
  throw StoreError("unknown run status " + text);
}

json RunDescriptor::to_json() const {
  json j = {{"run_id", run_id},
            {"label", label},
            {"status", dtwin::to_string(status)},
            {"submitted_at", submitted_at},
            {"finished_at", finished_at.empty() ? json() : json(finished_at)},
            {"progress", progress},
            {"config", config}};
  if (!error.empty()) j["error"] = error;
  return j;
}

RunDescriptor RunDescriptor::from_json(const json& j) {
  RunDescriptor d;
  try {
    d.run_id = j.at("run_id").get<std::string>();
    d.label = j.value("label", std::string{});
    d.status = parse_run_status(j.at("status").get<std::string>());
    d.submitted_at = j.value("submitted_at", std::string{});
    if (j.contains("finished_at") && j.at("finished_at").is_string()) d.finished_at = j.at("finished_at");
    d.progress = j.value("progress", 0.0);
    d.error = j.value("error", std::string{});
    d.config = j.value("config", json::object());
  } catch (const json::exception& e) {
    throw StoreError(std::string("bad run descriptor: ") + e.what());
  }
  return d;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

int rank(RunStatus s) { return s == RunStatus::Queued ? 0 : s == RunStatus::Running ? 1 : 2; }

bool active(RunStatus s) { return s == RunStatus::Queued || s == RunStatus::Running; }

std::string new_id() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard<std::mutex> lock(m);
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[20];
  std::strftime(stamp, sizeof stamp, "%Y%m%d%H%M%S", &tm);
  char suffix[9];
  std::snprintf(suffix, sizeof suffix, "%08x", static_cast<unsigned>(rng() & 0xffffffffu));
  return std::string("r") + stamp + "-" + suffix;
}

}  // namespace

RunStore::RunStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  const fs::path index = root_ / "index.json";
  if (fs::exists(index)) {
    json doc;
    try {
      doc = json::parse(read_file(index));
    } catch (const json::exception& e) {
      throw StoreError("corrupt store index " + index.string() + ": " + e.what());
    }
    for (const json& r : doc.value("runs", json::array())) runs_.push_back(RunDescriptor::from_json(r));
  }
  bool changed = false;
  for (RunDescriptor& d : runs_) {
    if (active(d.status)) {
      d.status = RunStatus::Failed;
      d.error = "interrupted: service restarted before the run finished";
      d.finished_at = utc_timestamp();
      changed = true;
    }
  }
  if (changed || !fs::exists(index)) {
    std::lock_guard<std::mutex> lock(mutex_);
    persist_index_locked();
  }
}

fs::path RunStore::run_dir(const std::string& run_id) const {
  // ids are generated here; refuse anything that could escape the root
  if (run_id.empty() || run_id.find_first_of("/\\.") != std::string::npos) {
    throw StoreError("invalid run id " + run_id);
  }
  return root_ / run_id;
}

void RunStore::persist_index_locked() const {
  json doc = {{"runs", json::array()}};
  for (const RunDescriptor& d : runs_) doc["runs"].push_back(d.to_json());
  write_file_atomic(root_ / "index.json", doc.dump(2) + "\n");
}

RunDescriptor* RunStore::find_locked(const std::string& run_id) {
  auto it = std::find_if(runs_.begin(), runs_.end(), [&](const RunDescriptor& d) { return d.run_id == run_id; });
  return it == runs_.end() ? nullptr : &*it;
}

RunDescriptor RunStore::create(const std::string& label, const json& config, const json& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  RunDescriptor d;
  do {
    d.run_id = new_id();
  } while (find_locked(d.run_id) || fs::exists(root_ / d.run_id));
  d.label = label;
  d.submitted_at = utc_timestamp();
  d.config = config;
  const fs::path dir = root_ / d.run_id;
  fs::create_directories(dir);
  write_file_atomic(dir / "request.json", request.dump(2) + "\n");
  write_file_atomic(dir / "config.json", config.dump(2) + "\n");
  runs_.push_back(d);
  persist_index_locked();
  return d;
}

std::optional<RunDescriptor> RunStore::get(const std::string& run_id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  for (const RunDescriptor& d : runs_) {
    if (d.run_id == run_id) return d;
  }
  return std::nullopt;
}

std::vector<RunDescriptor> RunStore::list() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return runs_;
}

void RunStore::set_status(const std::string& run_id, RunStatus status, const std::string& error) {
  std::lock_guard<std::mutex> lock(mutex_);
  RunDescriptor* d = find_locked(run_id);
  if (!d) throw StoreError("unknown run " + run_id);
  if (rank(status) < rank(d->status) || (rank(status) == 2 && rank(d->status) == 2) ||
      (status == d->status)) {
    throw StoreError("run " + run_id + ": illegal transition " + to_string(d->status) + " -> " + to_string(status));
  }
  d->status = status;
  if (!error.empty()) d->error = error;
  if (status == RunStatus::Done) d->progress = 1.0;
  if (rank(status) == 2) d->finished_at = utc_timestamp();
  persist_index_locked();
}

void RunStore::set_progress(const std::string& run_id, double fraction) {
  std::lock_guard<std::mutex> lock(mutex_);
  RunDescriptor* d = find_locked(run_id);
  if (!d) return;
  d->progress = std::max(d->progress, std::clamp(fraction, 0.0, 1.0));
}

void RunStore::remove(const std::string& run_id) {
  std::lock_guard<std::mutex> lock(mutex_);
  RunDescriptor* d = find_locked(run_id);
  if (!d) throw StoreError("unknown run " + run_id);
  if (active(d->status)) throw StoreError("run " + run_id + " is still " + to_string(d->status));
  const fs::path dir = run_dir(run_id);
  runs_.erase(runs_.begin() + (d - runs_.data()));
  persist_index_locked();
  std::error_code ec;
  fs::remove_all(dir, ec);
}

}  // namespace dtwin
