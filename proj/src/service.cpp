#include "dtwin/service.hpp"

#include <cmath>
#include <filesystem>

namespace dtwin {

namespace fs = std::filesystem;
using nlohmann::json;

json compare_reports(const json& a, const json& b) {
  json out = json::object();
  // report fields only; report.json also carries run bookkeeping such as wall_clock_s
  for (const auto& [name, unused] : report_fields(Report{})) {
    if (!a.contains(name) || !b.contains(name) || !a.at(name).is_number() || !b.at(name).is_number()) continue;
    const double va = a.at(name).get<double>();
    const double vb = b.at(name).get<double>();
    json f = {{"a", va}, {"b", vb}, {"delta", vb - va}};
    f["pct"] = va != 0.0 ? json(100.0 * (vb - va) / std::abs(va)) : json();
    out[name] = f;
  }
  // efficiency in percentage points is what operators read off
  if (out.contains("eta_system")) out["eta_system"]["delta_pp"] = 100.0 * out["eta_system"]["delta"].get<double>();
  return out;
}

Service::Service(RunStore& store, ServiceOptions options) : store_(store), options_(std::move(options)) {
  const int n = std::max(1, options_.max_concurrent_runs);
  for (int i = 0; i < n; ++i) workers_.emplace_back([this] { worker(); });
}

Service::~Service() { shutdown(); }

void Service::shutdown() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (stopping_) return;
    stopping_ = true;
    for (auto& [id, flag] : cancel_) flag->store(true);
  }
  cv_.notify_all();
  for (std::thread& t : workers_) {
    if (t.joinable()) t.join();
  }
  // anything still queued never started
  for (auto& job : queue_) {
    try {
      store_.set_status(job->run_id, RunStatus::Failed, "service stopped before the run started");
    } catch (const StoreError&) {
    }
  }
  queue_.clear();
  done_cv_.notify_all();
}

RunDescriptor Service::submit(const json& request) {
  Scenario sc;
  try {
    sc = build_scenario(request, options_.base_config);
  } catch (const ConfigError& e) {
    throw ServiceError(400, e.what(), {{"field", e.field()}});
  } catch (const WorkloadError& e) {
    throw ServiceError(400, e.what(), {{"field", "workload"}});
  } catch (const SchedulerError& e) {
    throw ServiceError(400, e.what(), {{"field", "workload"}});
  }
  RunDescriptor d = store_.create(sc.label, config_to_json(sc.config), request);
  if (sc.ingest) write_file_atomic(store_.run_dir(d.run_id) / "ingest.json", sc.ingest->to_json().dump(2) + "\n");
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (stopping_) throw ServiceError(503, "service is shutting down");
    cancel_[d.run_id] = std::make_shared<std::atomic<bool>>(false);
    queue_.push_back(std::make_unique<Job>(Job{d.run_id, std::move(sc)}));
  }
  cv_.notify_one();
  return d;
}

void Service::worker() {
  while (true) {
    std::unique_ptr<Job> job;
    {
      std::unique_lock<std::mutex> lock(mutex_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }
    execute(*job);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      cancel_.erase(job->run_id);
    }
    done_cv_.notify_all();
  }
}

void Service::execute(Job& job) {
  const std::string& id = job.run_id;
  std::shared_ptr<std::atomic<bool>> cancel;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    cancel = cancel_[id];
  }
  try {
    store_.set_status(id, RunStatus::Running);
    EngineHooks hooks;
    hooks.cancel = cancel.get();
    hooks.on_progress = [&](double f) { store_.set_progress(id, f); };
    RunResult r = run_simulation(job.scenario.config, job.scenario.jobs, job.scenario.options, hooks);
    // outputs land in a staging dir first so a failure never leaves half a run behind
    const fs::path dir = store_.run_dir(id);
    const fs::path staging = dir / ".staging";
    fs::remove_all(staging);
    export_run(r, staging);
    for (const auto& entry : fs::directory_iterator(staging)) fs::rename(entry.path(), dir / entry.path().filename());
    fs::remove_all(staging);
    store_.set_status(id, RunStatus::Done);
  } catch (const std::exception& e) {
    try {
      write_file_atomic(store_.run_dir(id) / "error.txt", std::string(e.what()) + "\n");
      store_.set_status(id, RunStatus::Failed, e.what());
    } catch (const std::exception&) {
    }
  }
}

RunDescriptor Service::require(const std::string& run_id) const {
  std::optional<RunDescriptor> d;
  try {
    d = store_.get(run_id);
  } catch (const StoreError&) {
  }
  if (!d) throw ServiceError(404, "unknown run " + run_id);
  return *d;
}

RunDescriptor Service::require_done(const std::string& run_id) const {
  RunDescriptor d = require(run_id);
  if (d.status != RunStatus::Done) {
    throw ServiceError(409, "run " + run_id + " is " + to_string(d.status), {{"status", to_string(d.status)}});
  }
  return d;
}

RunDescriptor Service::get(const std::string& run_id) const { return require(run_id); }

std::vector<RunDescriptor> Service::list() const { return store_.list(); }

std::string Service::report_text(const std::string& run_id) const {
  require_done(run_id);
  return read_file(store_.run_dir(run_id) / "report.json");
}

TimeSeries Service::series(const std::string& run_id, const std::string& metric, std::size_t stride) const {
  require_done(run_id);
  if (stride == 0) throw ServiceError(400, "stride must be >= 1");
  const fs::path dir = store_.run_dir(run_id);
  for (const char* file : {"power.csv", "cooling.csv"}) {
    if (!fs::exists(dir / file)) continue;
    CsvTable t = read_csv(dir / file);
    if (metric != "time_s" && t.column_index(metric) >= 0) return downsample(metric_series_from_csv(t, metric), stride);
  }
  throw ServiceError(404, "run " + run_id + " has no metric " + metric);
}

json Service::compare(const std::string& run_a, const std::string& run_b) const {
  const RunDescriptor a = require_done(run_a);
  const RunDescriptor b = require_done(run_b);
  const json ra = json::parse(report_text(run_a));
  const json rb = json::parse(report_text(run_b));
  return {{"a", run_a}, {"b", run_b}, {"label_a", a.label}, {"label_b", b.label}, {"fields", compare_reports(ra, rb)}};
}

void Service::remove(const std::string& run_id) {
  RunDescriptor d = require(run_id);
  if (d.status == RunStatus::Queued || d.status == RunStatus::Running) {
    throw ServiceError(409, "run " + run_id + " is " + to_string(d.status) + "; wait for it to finish");
  }
  try {
    store_.remove(run_id);
  } catch (const StoreError& e) {
    throw ServiceError(409, e.what());
  }
}

RunDescriptor Service::wait(const std::string& run_id, std::chrono::milliseconds timeout) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::unique_lock<std::mutex> lock(mutex_);
  while (true) {
    RunDescriptor d = require(run_id);
    if (d.status == RunStatus::Done || d.status == RunStatus::Failed) return d;
    if (done_cv_.wait_until(lock, deadline) == std::cv_status::timeout) return require(run_id);
  }
}

}  // namespace dtwin
