#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtwin/config.hpp"
#include "dtwin/cooling.hpp"
#include "dtwin/power_kernels.hpp"
#include "dtwin/scheduler.hpp"
#include "dtwin/workload.hpp"

namespace dtwin {

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RunCancelled : public std::runtime_error {
 public:
  RunCancelled() : std::runtime_error("run cancelled") {}
};

struct TimeSeries {
  std::vector<double> time_s;
  std::vector<double> value;
  std::size_t size() const { return time_s.size(); }
};

/// Within one tick the phases fire in this order; Cooling only on stride ticks.
enum class Phase { Arrivals, Schedule, Release, Power, Losses, Cooling };
std::string to_string(Phase phase);

struct EngineHooks {
  std::function<void(Phase, std::int64_t tick, double now_s)> on_phase;
  std::function<void(double fraction)> on_progress;
  const std::atomic<bool>* cancel = nullptr;
};

struct RunOptions {
  double duration_s = 3600.0;
  /// (time, wetbulb) samples, linearly interpolated; constant config value when empty.
  TimeSeries wetbulb;
  Exec exec = Exec::Parallel;
};

/// Per-tick aggregates, stored column-wise.
struct PowerSeries {
  int num_cdus = 0;
  std::vector<double> time_s;
  std::vector<double> p_system_w;
  std::vector<double> p_it_out_w;
  std::vector<double> loss_rectifier_w;
  std::vector<double> loss_sivoc_w;
  std::vector<double> loss_total_w;
  std::vector<double> eta_system;
  std::vector<int> nodes_busy;
  std::vector<int> jobs_submitted;
  std::vector<int> jobs_pending;
  std::vector<int> jobs_running;
  std::vector<int> jobs_completed;
  std::vector<int> jobs_rejected;
  /// row-major [sample][cdu]
  std::vector<double> p_cdu_group_w;

  std::size_t size() const { return time_s.size(); }
  double cdu_group(std::size_t sample, int cdu) const {
    return p_cdu_group_w[sample * static_cast<std::size_t>(num_cdus) + static_cast<std::size_t>(cdu)];
  }
  void reserve(std::size_t n);
  void push(const PowerSample& sample);
};

enum class AllocationKind { Start, End };

struct AllocationEvent {
  double time_s = 0.0;
  std::int64_t job_id = 0;
  AllocationKind kind = AllocationKind::Start;
  std::vector<int> nodes;
  bool operator==(const AllocationEvent&) const = default;
};

enum class JobState { Pending, Running, Completed, Rejected };
std::string to_string(JobState state);

struct JobRecord {
  std::int64_t job_id = 0;
  std::string job_name;
  int node_count = 0;
  double submit_time = 0.0;
  double wall_time_s = 0.0;
  std::optional<double> start_time;
  std::optional<double> end_time;
  JobState state = JobState::Pending;
  std::string note;
};

struct RunResult {
  SystemConfig config;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  PowerSeries power;
  std::vector<CoolingOutputs> cooling;
  std::vector<AllocationEvent> allocations;
  std::vector<JobRecord> jobs;
  std::vector<ReplayConflict> conflicts;
  std::vector<std::string> warnings;
  std::int64_t saturated_chassis_ticks = 0;
  double wall_clock_s = 0.0;
};

/// Main loop. Jobs must be sorted by submit time.
RunResult run_simulation(const SystemConfig& config, const std::vector<Job>& jobs, const RunOptions& options = {},
                         const EngineHooks& hooks = {});

struct Report {
  double duration_s = 0.0;
  std::int64_t jobs_completed = 0;
  double throughput_jobs_per_hr = 0.0;
  double avg_power_mw = 0.0;
  double total_energy_mwh = 0.0;
  double it_energy_mwh = 0.0;
  double loss_mw = 0.0;
  double loss_pct = 0.0;
  double eta_system = 0.0;
  double co2_tons = 0.0;
  double energy_cost_usd = 0.0;
  double avg_pue = 0.0;
};

/// Trapezoidal integral of a sampled signal.
double trapezoid(const std::vector<double>& t, const std::vector<double>& y);

/// energy * E_I / lbs_per_ton / eta
double co2_tons(double energy_mwh, const EconomicsParams& economics, double eta_system);

Report make_report(const RunResult& result, const EconomicsParams& economics);
Report make_report(const RunResult& result);

/// Stable field order shared by JSON, comparisons and ensembles.
std::vector<std::pair<std::string, double>> report_fields(const Report& report);
nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& document);

struct ErrorMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t samples = 0;
};

/// Aligns each measured sample in the common time range with the nearest predicted sample.
ErrorMetrics compare_series(const TimeSeries& predicted, const TimeSeries& measured);
ErrorMetrics compare_with_measured(const RunResult& result, const TimeSeries& measured_power_w);

struct FieldStats {
  double min = 0.0;
  double avg = 0.0;
  double max = 0.0;
  double std = 0.0;
};

struct EnsembleTable {
  std::vector<std::uint64_t> seeds;
  std::vector<Report> reports;
  std::vector<std::pair<std::string, FieldStats>> fields;

  const FieldStats& field(const std::string& name) const;
  nlohmann::json to_json() const;
};

EnsembleTable aggregate_reports(const std::vector<Report>& reports);

/// Independent synthetic runs, one per seed, parallel across seeds.
EnsembleTable run_ensemble(const SystemConfig& config, const WorkloadStats& stats,
                           const std::vector<std::uint64_t>& seeds, double duration_s);
EnsembleTable run_ensemble(const SystemConfig& config, const WorkloadStats& stats, int n_seeds,
                           double duration_s);

}  // namespace dtwin
