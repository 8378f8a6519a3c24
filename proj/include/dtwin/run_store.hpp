#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dtwin {

enum class RunStatus { Queued, Running, Done, Failed };
std::string to_string(RunStatus status);
RunStatus parse_run_status(const std::string& text);

struct RunDescriptor {
  std::string run_id;
  std::string label;
  RunStatus status = RunStatus::Queued;
  std::string submitted_at;
  std::string finished_at;
  double progress = 0.0;
  std::string error;
  nlohmann::json config;

  nlohmann::json to_json() const;
  static RunDescriptor from_json(const nlohmann::json& document);
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// UTC, second resolution, e.g. 2024-05-01T12:00:00Z
std::string utc_timestamp();

/// Directory-per-run store with an index.json at the root. Every file write
/// goes through a temp file and a rename. Opening a store marks runs that were
/// QUEUED or RUNNING in a previous process as FAILED.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path run_dir(const std::string& run_id) const;

  /// New QUEUED run with a fresh id; writes request.json and config.json.
  RunDescriptor create(const std::string& label, const nlohmann::json& config, const nlohmann::json& request);

  std::optional<RunDescriptor> get(const std::string& run_id) const;
  std::vector<RunDescriptor> list() const;

  /// Status only moves forward (QUEUED -> RUNNING -> DONE|FAILED). Throws StoreError otherwise.
  void set_status(const std::string& run_id, RunStatus status, const std::string& error = {});
  /// Progress never decreases; kept in memory and persisted with the next status change.
  void set_progress(const std::string& run_id, double fraction);

  /// Deletes a finished run and its directory. Throws StoreError for active runs.
  void remove(const std::string& run_id);

 private:
  void persist_index_locked() const;
  RunDescriptor* find_locked(const std::string& run_id);

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::vector<RunDescriptor> runs_;
};

}  // namespace dtwin
