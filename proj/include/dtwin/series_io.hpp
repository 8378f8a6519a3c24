#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtwin/cooling.hpp"
#include "dtwin/engine.hpp"

namespace dtwin {

class SeriesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// -1 when absent
  int column_index(const std::string& name) const;
  std::vector<double> numeric_column(const std::string& name) const;
};

/// Plain comma-separated values with a header line. No quoting.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

// columnar exports, one file per series
std::string power_csv(const PowerSeries& power);
std::string cooling_csv(const std::vector<CoolingOutputs>& cooling, const Topology& topology,
                        const CoolingParams& params);
std::string jobs_csv(const std::vector<JobRecord>& jobs);
/// nodes as ranges, e.g. "0-15;32"
std::string allocations_csv(const std::vector<AllocationEvent>& events);
std::string node_ranges(std::vector<int> nodes);

/// Names of the extra diagnostic columns that follow the 317 schema values in cooling.csv.
const std::vector<std::string>& cooling_diagnostic_names();

/// Writes power.csv, cooling.csv (when cooling ran), jobs.csv, allocations.csv,
/// report.json and warnings.json into `dir`.
void export_run(const RunResult& result, const std::filesystem::path& dir);

/// Looks `metric` up among the power columns, then the cooling columns.
/// Adds loss_pct derived per sample. Throws SeriesError for unknown names.
TimeSeries metric_series(const RunResult& result, const std::string& metric);
TimeSeries metric_series_from_csv(const CsvTable& table, const std::string& metric);
std::vector<std::string> power_metric_names(int num_cdus);

/// Stride-mean; a partial last window is averaged over what it has.
TimeSeries downsample(const TimeSeries& series, std::size_t stride);

/// Two-column file `time_s,<value_column>`.
TimeSeries read_time_series_csv(const std::filesystem::path& path, const std::string& value_column);
/// time_s,power_w
TimeSeries read_measured_power_csv(const std::filesystem::path& path);
/// time_s,wetbulb_c
TimeSeries read_wetbulb_csv(const std::filesystem::path& path);

struct CosimRecord {
  double time_s = 0.0;
  CoolingInputs inputs;
};

/// Step-input file for external co-simulation: time_s, wetbulb_temperature,
/// rack_power_00..rack_power_NN (per CDU group heat in W), optional system_power_w.
std::vector<CosimRecord> read_cosim_inputs(const std::filesystem::path& path, int num_cdus);

/// Drives the cooling model file-wise: warm start on the first record, then one
/// step per subsequent record over the time difference. Returns cooling.csv text.
std::string run_cosim(const CoolingModel& model, const Topology& topology, const std::vector<CosimRecord>& records,
                      double warmup_s);

}  // namespace dtwin
