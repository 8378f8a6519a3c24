#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtwin/config.hpp"

namespace dtwin {

class WorkloadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Utilization samples held for `quanta_s` seconds each.
struct UtilTrace {
  double quanta_s = 15.0;
  std::vector<double> values;

  double duration_s() const { return quanta_s * static_cast<double>(values.size()); }
  /// Zero-order hold lookup; elapsed past the end repeats the last sample.
  double at(double elapsed_s) const;

  bool operator==(const UtilTrace&) const = default;
};

struct Job {
  std::int64_t job_id = 0;
  std::string job_name;
  int node_count = 1;
  double submit_time = 0.0;
  double wall_time_s = 1.0;
  UtilTrace cpu_trace;
  UtilTrace gpu_trace;
  std::optional<std::vector<int>> pinned_nodes;

  bool operator==(const Job&) const = default;
};

/// Throws WorkloadError if a job violates its invariants.
void validate_job(const Job& job);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  bool operator==(const MeanStd&) const = default;
};

struct WorkloadStats {
  double t_avg_s = 138.0;
  MeanStd node_count_dist{268.0, 626.0};
  MeanStd wall_time_dist{39.0 * 60.0, 14.0 * 60.0};
  MeanStd cpu_util_dist{0.40, 0.20};
  MeanStd gpu_util_dist{0.60, 0.20};

  bool operator==(const WorkloadStats&) const = default;
};

nlohmann::json stats_to_json(const WorkloadStats& stats);
WorkloadStats stats_from_json(const nlohmann::json& document);

// ---------------------------------------------------------------------------
// Trace ingest

/// Summary emitted next to an ingested trace.
struct IngestReport {
  std::size_t jobs = 0;
  std::size_t samples = 0;
  std::size_t clamped_below_idle = 0;
  std::size_t clamped_above_max = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// One record as it appears in a telemetry file, before power -> utilization
/// inversion. Readers for other telemetry layouts produce these.
struct TraceRecord {
  std::int64_t job_id = 0;
  std::string job_name;
  int node_count = 1;
  double submit_time = 0.0;
  std::optional<double> wall_time_s;
  std::vector<double> cpu_power_w;
  std::vector<double> gpu_power_w;
  std::optional<std::vector<int>> nodes;
};

struct TraceDocument {
  double quanta_s = 15.0;
  std::vector<TraceRecord> records;
};

using TraceReader = std::function<TraceDocument(const std::filesystem::path&)>;

/// Reads the JSON trace layout documented in docs/trace_format.md.
TraceDocument read_json_trace(const std::filesystem::path& path);
TraceDocument parse_json_trace(const nlohmann::json& document);

/// Readings above max by more than this fraction abort the ingest.
inline constexpr double kAboveMaxTolerance = 0.05;

/// Power -> utilization inversion, clamp((P - idle) / (max - idle), 0, 1).
double power_to_util(double power_w, double idle_w, double max_w);

std::vector<Job> ingest_records(const TraceDocument& trace, const ComponentPowerTable& table,
                                IngestReport* report = nullptr);

std::vector<Job> ingest_trace(const std::filesystem::path& path, const ComponentPowerTable& table,
                              IngestReport* report = nullptr, const TraceReader& reader = read_json_trace);

// ---------------------------------------------------------------------------
// Synthetic generation

/// tau = -ln(1 - u) / lambda for u in [0, 1).
double sample_interarrival(double lambda_per_s, double u);

std::vector<Job> generate_synthetic(const WorkloadStats& stats, double duration_s, std::uint64_t seed,
                                    int nodes_total = 9472, double quanta_s = 15.0);

WorkloadStats derive_stats(const std::vector<Job>& jobs);

/// Sorts by submit time, then job id.
void sort_by_submit(std::vector<Job>& jobs);

nlohmann::json jobs_to_json(const std::vector<Job>& jobs, double quanta_s);
std::vector<Job> jobs_from_json(const nlohmann::json& document);

}  // namespace dtwin
