#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtwin/engine.hpp"
#include "dtwin/run_store.hpp"
#include "dtwin/scenario.hpp"
#include "dtwin/series_io.hpp"

namespace dtwin {

/// Carries the HTTP status the API should answer with.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message, nlohmann::json detail = {})
      : std::runtime_error(message), status_(status), detail_(std::move(detail)) {}
  int status() const { return status_; }
  const nlohmann::json& detail() const { return detail_; }

 private:
  int status_;
  nlohmann::json detail_;
};

struct ServiceOptions {
  int max_concurrent_runs = 2;
  SystemConfig base_config;
};

/// Report-field deltas (b - a) between two finished runs.
nlohmann::json compare_reports(const nlohmann::json& report_a, const nlohmann::json& report_b);

/// Executes runs asynchronously against a RunStore. All durable state is in the
/// store; the service only keeps the work queue and cancel flags.
class Service {
 public:
  Service(RunStore& store, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Validates synchronously (400 with the offending field), then queues.
  RunDescriptor submit(const nlohmann::json& request);

  RunDescriptor get(const std::string& run_id) const;
  std::vector<RunDescriptor> list() const;
  /// report.json of a DONE run, byte for byte.
  std::string report_text(const std::string& run_id) const;
  TimeSeries series(const std::string& run_id, const std::string& metric, std::size_t stride) const;
  nlohmann::json compare(const std::string& run_a, const std::string& run_b) const;
  void remove(const std::string& run_id);

  /// Blocks until the run leaves QUEUED/RUNNING or the timeout passes.
  RunDescriptor wait(const std::string& run_id, std::chrono::milliseconds timeout) const;

  void shutdown();
  RunStore& store() { return store_; }

 private:
  struct Job {
    std::string run_id;
    Scenario scenario;
  };

  RunDescriptor require(const std::string& run_id) const;
  RunDescriptor require_done(const std::string& run_id) const;
  void worker();
  void execute(Job& job);

  RunStore& store_;
  ServiceOptions options_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  mutable std::condition_variable done_cv_;
  std::deque<std::unique_ptr<Job>> queue_;
  std::map<std::string, std::shared_ptr<std::atomic<bool>>> cancel_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace dtwin
