#include "dtwin/series_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <nlohmann/json.hpp>

namespace dtwin {

namespace fs = std::filesystem;

namespace {

void put(std::string& out, double v) {
  char buf[32];
  int n = std::snprintf(buf, sizeof buf, "%.10g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

void put(std::string& out, long long v) { out += std::to_string(v); }

std::string idx2(int i) {
  std::string s = std::to_string(i);
  return s.size() < 2 ? "0" + s : s;
}

std::string join(const std::vector<std::string>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += xs[i];
  }
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.pop_back();
    std::size_t b = f.find_first_not_of(' ');
    f = b == std::string::npos ? std::string{} : f.substr(b);
  }
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SeriesError(where + ": not a number '" + s + "'");
  }
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  static std::atomic<unsigned> counter{0};
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw SeriesError("cannot write " + tmp.string());
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    f.flush();
    if (!f) throw SeriesError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw SeriesError("rename to " + path.string() + " failed: " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SeriesError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
  const int c = column_index(name);
  if (c < 0) throw SeriesError("missing column " + name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.push_back(to_double(rows[r][static_cast<std::size_t>(c)], name + " row " + std::to_string(r + 1)));
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw SeriesError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw SeriesError("empty csv");
  return t;
}

CsvTable read_csv(const fs::path& path) {
  try {
    return parse_csv(read_file(path));
  } catch (const SeriesError& e) {
    throw SeriesError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

std::vector<std::string> power_metric_names(int num_cdus) {
  std::vector<std::string> names = {"p_system_w",    "p_it_out_w",     "loss_rectifier_w", "loss_sivoc_w",
                                    "loss_total_w",  "loss_pct",       "eta_system",       "nodes_busy",
                                    "jobs_submitted", "jobs_pending",  "jobs_running",     "jobs_completed",
                                    "jobs_rejected"};
  for (int c = 0; c < num_cdus; ++c) names.push_back("cdu_" + idx2(c) + "_power_w");
  return names;
}

std::string power_csv(const PowerSeries& p) {
  std::string out = "time_s," + join(power_metric_names(p.num_cdus)) + "\n";
  out.reserve(p.size() * (200 + 14 * static_cast<std::size_t>(p.num_cdus)));
  for (std::size_t i = 0; i < p.size(); ++i) {
    put(out, p.time_s[i]);
    for (double v : {p.p_system_w[i], p.p_it_out_w[i], p.loss_rectifier_w[i], p.loss_sivoc_w[i], p.loss_total_w[i],
                     p.p_system_w[i] > 0.0 ? 100.0 * p.loss_total_w[i] / p.p_system_w[i] : 0.0, p.eta_system[i]}) {
      out += ',';
      put(out, v);
    }
    for (int v : {p.nodes_busy[i], p.jobs_submitted[i], p.jobs_pending[i], p.jobs_running[i], p.jobs_completed[i],
                  p.jobs_rejected[i]}) {
      out += ',';
      put(out, static_cast<long long>(v));
    }
    for (int c = 0; c < p.num_cdus; ++c) {
      out += ',';
      put(out, p.cdu_group(i, c));
    }
    out += '\n';
  }
  return out;
}

const std::vector<std::string>& cooling_diagnostic_names() {
  static const std::vector<std::string> names = {
      "heat_in_w",   "heat_rejected_w",  "ctw_supply_c",   "ctw_return_c",    "ct_header_kpa",
      "wetbulb_c",   "num_ctwp_staging", "system_power_w", "aux_cdu_pumps_w", "aux_htwp_w",
      "aux_ctwp_w",  "aux_ct_fans_w",    "aux_power_w"};
  return names;
}

std::string cooling_csv(const std::vector<CoolingOutputs>& cooling, const Topology& topology,
                        const CoolingParams& params) {
  std::vector<std::string> header = {"time_s"};
  auto names = cooling_output_names(topology, params);
  header.insert(header.end(), names.begin(), names.end());
  header.insert(header.end(), cooling_diagnostic_names().begin(), cooling_diagnostic_names().end());
  std::string out = join(header) + "\n";
  for (const CoolingOutputs& o : cooling) {
    put(out, o.time_s);
    for (double v : flatten(o)) {
      out += ',';
      put(out, v);
    }
    for (double v : {o.heat_in_w, o.heat_rejected_w, o.ctw_supply_c, o.ctw_return_c, o.ct_header_kpa, o.wetbulb_c,
                     static_cast<double>(o.n_ctwp), o.system_power_w, o.aux.cdu_pumps_w, o.aux.htwp_w, o.aux.ctwp_w,
                     o.aux.ct_fans_w, o.aux.total()}) {
      out += ',';
      put(out, v);
    }
    out += '\n';
  }
  return out;
}

std::string jobs_csv(const std::vector<JobRecord>& jobs) {
  std::string out = "job_id,job_name,node_count,submit_time,wall_time_s,start_time,end_time,state\n";
  for (const JobRecord& j : jobs) {
    std::string name = j.job_name;
    for (char& ch : name) {
      if (ch == ',' || ch == '\n' || ch == '\r') ch = '_';
    }
    put(out, static_cast<long long>(j.job_id));
    out += ',' + name + ',';
    put(out, static_cast<long long>(j.node_count));
    out += ',';
    put(out, j.submit_time);
    out += ',';
    put(out, j.wall_time_s);
    out += ',';
    if (j.start_time) put(out, *j.start_time);
    out += ',';
    if (j.end_time) put(out, *j.end_time);
    out += ',' + to_string(j.state) + '\n';
  }
  return out;
}

std::string node_ranges(std::vector<int> nodes) {
  std::sort(nodes.begin(), nodes.end());
  std::string out;
  std::size_t i = 0;
  while (i < nodes.size()) {
    std::size_t j = i;
    while (j + 1 < nodes.size() && nodes[j + 1] == nodes[j] + 1) ++j;
    if (!out.empty()) out += ';';
    out += std::to_string(nodes[i]);
    if (j > i) out += '-' + std::to_string(nodes[j]);
    i = j + 1;
  }
  return out;
}

std::string allocations_csv(const std::vector<AllocationEvent>& events) {
  std::string out = "time_s,job_id,event,node_count,nodes\n";
  for (const AllocationEvent& e : events) {
    put(out, e.time_s);
    out += ',';
    put(out, static_cast<long long>(e.job_id));
    out += e.kind == AllocationKind::Start ? ",start," : ",end,";
    put(out, static_cast<long long>(e.nodes.size()));
    out += ',' + node_ranges(e.nodes) + '\n';
  }
  return out;
}

void export_run(const RunResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  write_file_atomic(dir / "power.csv", power_csv(r.power));
  if (!r.cooling.empty()) {
    write_file_atomic(dir / "cooling.csv", cooling_csv(r.cooling, r.config.topology, r.config.cooling));
  }
  write_file_atomic(dir / "jobs.csv", jobs_csv(r.jobs));
  write_file_atomic(dir / "allocations.csv", allocations_csv(r.allocations));
  nlohmann::json rep = report_to_json(make_report(r));
  rep["seed"] = r.seed;
  rep["saturated_chassis_ticks"] = r.saturated_chassis_ticks;
  rep["replay_conflicts"] = r.conflicts.size();
  rep["wall_clock_s"] = r.wall_clock_s;
  write_file_atomic(dir / "report.json", rep.dump(2) + "\n");
  write_file_atomic(dir / "warnings.json", nlohmann::json(r.warnings).dump(2) + "\n");
}

// ---------------------------------------------------------------------------

TimeSeries metric_series(const RunResult& r, const std::string& metric) {
  const PowerSeries& p = r.power;
  TimeSeries ts;
  auto from_power = [&](const std::vector<double>& v) {
    ts.time_s = p.time_s;
    ts.value = v;
    return ts;
  };
  auto from_counts = [&](const std::vector<int>& v) {
    ts.time_s = p.time_s;
    ts.value.assign(v.begin(), v.end());
    return ts;
  };
  if (metric == "p_system_w") return from_power(p.p_system_w);
  if (metric == "p_it_out_w") return from_power(p.p_it_out_w);
  if (metric == "loss_rectifier_w") return from_power(p.loss_rectifier_w);
  if (metric == "loss_sivoc_w") return from_power(p.loss_sivoc_w);
  if (metric == "loss_total_w") return from_power(p.loss_total_w);
  if (metric == "eta_system") return from_power(p.eta_system);
  if (metric == "loss_pct") {
    ts.time_s = p.time_s;
    for (std::size_t i = 0; i < p.size(); ++i) {
      ts.value.push_back(p.p_system_w[i] > 0.0 ? 100.0 * p.loss_total_w[i] / p.p_system_w[i] : 0.0);
    }
    return ts;
  }
  if (metric == "nodes_busy") return from_counts(p.nodes_busy);
  if (metric == "jobs_submitted") return from_counts(p.jobs_submitted);
  if (metric == "jobs_pending") return from_counts(p.jobs_pending);
  if (metric == "jobs_running") return from_counts(p.jobs_running);
  if (metric == "jobs_completed") return from_counts(p.jobs_completed);
  if (metric == "jobs_rejected") return from_counts(p.jobs_rejected);
  for (int c = 0; c < p.num_cdus; ++c) {
    if (metric == "cdu_" + idx2(c) + "_power_w") {
      ts.time_s = p.time_s;
      for (std::size_t i = 0; i < p.size(); ++i) ts.value.push_back(p.cdu_group(i, c));
      return ts;
    }
  }
  if (!r.cooling.empty()) {
    const auto names = cooling_output_names(r.config.topology, r.config.cooling);
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (names[k] != metric) continue;
      for (const CoolingOutputs& o : r.cooling) {
        ts.time_s.push_back(o.time_s);
        ts.value.push_back(flatten(o)[k]);
      }
      return ts;
    }
  }
  throw SeriesError("unknown metric " + metric);
}

TimeSeries metric_series_from_csv(const CsvTable& table, const std::string& metric) {
  if (metric == "time_s" || table.column_index(metric) < 0) throw SeriesError("unknown metric " + metric);
  return {table.numeric_column("time_s"), table.numeric_column(metric)};
}

TimeSeries downsample(const TimeSeries& s, std::size_t stride) {
  if (stride == 0) throw SeriesError("stride must be >= 1");
  if (stride == 1) return s;
  TimeSeries out;
  for (std::size_t i = 0; i < s.size(); i += stride) {
    const std::size_t end = std::min(i + stride, s.size());
    double sum = 0.0;
    for (std::size_t k = i; k < end; ++k) sum += s.value[k];
    out.time_s.push_back(s.time_s[i]);
    out.value.push_back(sum / static_cast<double>(end - i));
  }
  return out;
}

TimeSeries read_time_series_csv(const fs::path& path, const std::string& value_column) {
  CsvTable t = read_csv(path);
  TimeSeries ts{t.numeric_column("time_s"), t.numeric_column(value_column)};
  if (ts.size() == 0) throw SeriesError(path.string() + ": no samples");
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (!(ts.time_s[i] > ts.time_s[i - 1])) {
      throw SeriesError(path.string() + ": time_s must be strictly increasing (row " + std::to_string(i + 1) + ")");
    }
  }
  for (double v : ts.value) {
    if (!std::isfinite(v)) throw SeriesError(path.string() + ": non-finite " + value_column);
  }
  return ts;
}

TimeSeries read_measured_power_csv(const fs::path& path) { return read_time_series_csv(path, "power_w"); }
TimeSeries read_wetbulb_csv(const fs::path& path) { return read_time_series_csv(path, "wetbulb_c"); }

std::vector<CosimRecord> read_cosim_inputs(const fs::path& path, int num_cdus) {
  CsvTable t = read_csv(path);
  const auto time = t.numeric_column("time_s");
  const auto wb = t.numeric_column("wetbulb_temperature");
  std::vector<std::vector<double>> racks;
  for (int c = 0; c < num_cdus; ++c) racks.push_back(t.numeric_column("rack_power_" + idx2(c)));
  const bool has_sys = t.column_index("system_power_w") >= 0;
  std::vector<double> sys = has_sys ? t.numeric_column("system_power_w") : std::vector<double>{};
  std::vector<CosimRecord> out(time.size());
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (i > 0 && !(time[i] > time[i - 1])) throw SeriesError("cosim time_s must increase");
    out[i].time_s = time[i];
    out[i].inputs.wetbulb_c = wb[i];
    for (int c = 0; c < num_cdus; ++c) out[i].inputs.cdu_heat_w.push_back(racks[static_cast<std::size_t>(c)][i]);
    if (has_sys) out[i].inputs.system_power_w = sys[i];
    validate(out[i].inputs, num_cdus);
  }
  return out;
}

std::string run_cosim(const CoolingModel& model, const Topology& topology, const std::vector<CosimRecord>& records,
                      double warmup_s) {
  std::vector<CoolingOutputs> outs;
  CoolingState state;
  for (std::size_t i = 0; i < records.size(); ++i) {
    CoolingStep st = i == 0 ? model.warmup(records[0].inputs, warmup_s)
                            : model.step(state, records[i].inputs, records[i].time_s - records[i - 1].time_s);
    state = std::move(st.state);
    st.outputs.time_s = records[i].time_s;
    outs.push_back(std::move(st.outputs));
  }
  return cooling_csv(outs, topology, model.params());
}

}  // namespace dtwin
