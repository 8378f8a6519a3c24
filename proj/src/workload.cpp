#include "dtwin/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace dtwin {

using json = nlohmann::json;

double UtilTrace::at(double elapsed_s) const {
  if (values.empty()) return 0.0;
  if (elapsed_s <= 0.0) return values.front();
  const auto index = static_cast<std::size_t>(elapsed_s / quanta_s);
  return values[std::min(index, values.size() - 1)];
}

void validate_job(const Job& job) {
  const std::string who = "job " + std::to_string(job.job_id);
  if (job.node_count < 1) throw WorkloadError(who + ": node_count must be >= 1");
  if (!(job.wall_time_s > 0.0)) throw WorkloadError(who + ": wall_time_s must be > 0");
  for (const UtilTrace* trace : {&job.cpu_trace, &job.gpu_trace}) {
    if (trace->values.empty()) throw WorkloadError(who + ": utilization trace is empty");
    if (!(trace->quanta_s > 0.0)) throw WorkloadError(who + ": trace quanta must be > 0");
    for (double v : trace->values) {
      if (!(v >= 0.0 && v <= 1.0)) throw WorkloadError(who + ": utilization outside [0, 1]");
    }
  }
  if (job.pinned_nodes && static_cast<int>(job.pinned_nodes->size()) != job.node_count) {
    throw WorkloadError(who + ": pinned node list size differs from node_count");
  }
}

json stats_to_json(const WorkloadStats& s) {
  auto pair = [](const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.std}}; };
  return {{"t_avg_s", s.t_avg_s},
          {"node_count_dist", pair(s.node_count_dist)},
          {"wall_time_dist_s", pair(s.wall_time_dist)},
          {"cpu_util_dist", pair(s.cpu_util_dist)},
          {"gpu_util_dist", pair(s.gpu_util_dist)}};
}

WorkloadStats stats_from_json(const json& document) {
  if (!document.is_object()) throw WorkloadError("workload stats: expected an object");
  WorkloadStats s;
  auto read_pair = [&](const char* key, MeanStd& out) {
    if (!document.contains(key)) return;
    const json& j = document.at(key);
    out.mean = j.value("mean", out.mean);
    out.std = j.value("std", out.std);
  };
  for (auto it = document.begin(); it != document.end(); ++it) {
    static const std::vector<std::string> known = {"t_avg_s", "node_count_dist", "wall_time_dist_s",
                                                   "cpu_util_dist", "gpu_util_dist"};
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw WorkloadError("workload stats: unknown field '" + it.key() + "'");
    }
  }
  try {
    s.t_avg_s = document.value("t_avg_s", s.t_avg_s);
    read_pair("node_count_dist", s.node_count_dist);
    read_pair("wall_time_dist_s", s.wall_time_dist);
    read_pair("cpu_util_dist", s.cpu_util_dist);
    read_pair("gpu_util_dist", s.gpu_util_dist);
  } catch (const json::exception& e) {
    throw WorkloadError(std::string("workload stats: ") + e.what());
  }
  return s;
}

json IngestReport::to_json() const {
  return {{"jobs", jobs},
          {"samples", samples},
          {"clamped_below_idle", clamped_below_idle},
          {"clamped_above_max", clamped_above_max},
          {"warnings", warnings}};
}

// ---------------------------------------------------------------------------

namespace {

TraceRecord parse_record(const json& j, std::size_t index) {
  const std::string where = "trace record " + std::to_string(index);
  if (!j.is_object()) throw WorkloadError(where + ": expected an object");
  TraceRecord r;
  try {
    r.job_id = j.at("job_id").get<std::int64_t>();
    r.job_name = j.value("job_name", std::string{});
    r.node_count = j.at("node_count").get<int>();
    if (j.contains("submit_time")) {
      r.submit_time = j.at("submit_time").get<double>();
    } else {
      r.submit_time = j.at("start_time").get<double>();
    }
    if (j.contains("wall_time_s")) r.wall_time_s = j.at("wall_time_s").get<double>();
    r.cpu_power_w = j.at("cpu_power").get<std::vector<double>>();
    r.gpu_power_w = j.at("gpu_power").get<std::vector<double>>();
    if (j.contains("nodes")) r.nodes = j.at("nodes").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw WorkloadError(where + ": " + e.what());
  }
  if (r.cpu_power_w.empty() || r.gpu_power_w.empty()) throw WorkloadError(where + ": empty power trace");
  return r;
}

}  // namespace

TraceDocument parse_json_trace(const json& document) {
  if (!document.is_object() || !document.contains("jobs") || !document.at("jobs").is_array()) {
    throw WorkloadError("trace: expected an object with a 'jobs' array");
  }
  TraceDocument trace;
  trace.quanta_s = document.value("quanta_s", 15.0);
  if (!(trace.quanta_s > 0.0)) throw WorkloadError("trace: quanta_s must be > 0");
  const json& jobs = document.at("jobs");
  trace.records.reserve(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) trace.records.push_back(parse_record(jobs[i], i));
  return trace;
}

TraceDocument read_json_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw WorkloadError("cannot open trace " + path.string());
  json document;
  try {
    in >> document;
  } catch (const json::parse_error& e) {
    throw WorkloadError("malformed trace " + path.string() + ": " + e.what());
  }
  return parse_json_trace(document);
}

double power_to_util(double power_w, double idle_w, double max_w) {
  if (max_w <= idle_w) return power_w > idle_w ? 1.0 : 0.0;
  return std::clamp((power_w - idle_w) / (max_w - idle_w), 0.0, 1.0);
}

std::vector<Job> ingest_records(const TraceDocument& trace, const ComponentPowerTable& table,
                                IngestReport* report) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  rep = IngestReport{};

  auto convert = [&](const std::vector<double>& powers, double idle, double max, const TraceRecord& r,
                     const char* component) {
    UtilTrace trace_out;
    trace_out.quanta_s = trace.quanta_s;
    trace_out.values.reserve(powers.size());
    for (double p : powers) {
      if (!std::isfinite(p)) {
        throw WorkloadError("job " + std::to_string(r.job_id) + ": non-finite " + component + " power");
      }
      if (p > max * (1.0 + kAboveMaxTolerance)) {
        throw WorkloadError("job " + std::to_string(r.job_id) + ": " + component + " power " + std::to_string(p) +
                            " W exceeds configured max " + std::to_string(max) + " W by more than 5%");
      }
      if (p < idle) ++rep.clamped_below_idle;
      if (p > max) ++rep.clamped_above_max;
      trace_out.values.push_back(power_to_util(p, idle, max));
      ++rep.samples;
    }
    return trace_out;
  };

  std::vector<Job> jobs;
  jobs.reserve(trace.records.size());
  for (const TraceRecord& r : trace.records) {
    Job job;
    job.job_id = r.job_id;
    job.job_name = r.job_name;
    job.node_count = r.node_count;
    job.submit_time = r.submit_time;
    job.cpu_trace = convert(r.cpu_power_w, table.cpu_idle_w, table.cpu_max_w, r, "cpu");
    job.gpu_trace = convert(r.gpu_power_w, table.gpu_idle_w, table.gpu_max_w, r, "gpu");
    job.wall_time_s = r.wall_time_s.value_or(std::max(job.cpu_trace.duration_s(), job.gpu_trace.duration_s()));
    job.pinned_nodes = r.nodes;
    validate_job(job);
    jobs.push_back(std::move(job));
  }
  if (rep.clamped_below_idle > 0) {
    rep.warnings.push_back(std::to_string(rep.clamped_below_idle) + " readings below idle clamped to 0 utilization");
  }
  rep.jobs = jobs.size();
  sort_by_submit(jobs);
  return jobs;
}

std::vector<Job> ingest_trace(const std::filesystem::path& path, const ComponentPowerTable& table,
                              IngestReport* report, const TraceReader& reader) {
  return ingest_records(reader(path), table, report);
}

// ---------------------------------------------------------------------------

double sample_interarrival(double lambda_per_s, double u) {
  if (!(lambda_per_s > 0.0)) throw WorkloadError("arrival rate must be > 0");
  return -std::log1p(-u) / lambda_per_s;
}

namespace {

// Rejection sampling from N(mean, std) restricted to [lo, hi].
double truncated_normal(std::mt19937_64& rng, const MeanStd& dist, double lo, double hi) {
  if (dist.std <= 0.0) return std::clamp(dist.mean, lo, hi);
  std::normal_distribution<double> normal(dist.mean, dist.std);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double x = normal(rng);
    if (x >= lo && x <= hi) return x;
  }
  return std::clamp(dist.mean, lo, hi);
}

void check_stats(const WorkloadStats& s) {
  if (!(s.t_avg_s > 0.0)) throw WorkloadError("t_avg_s must be > 0");
  for (auto [m, name] : {std::pair{&s.node_count_dist, "node_count_dist"}, {&s.wall_time_dist, "wall_time_dist"},
                         {&s.cpu_util_dist, "cpu_util_dist"}, {&s.gpu_util_dist, "gpu_util_dist"}}) {
    if (!(m->mean >= 0.0) || !std::isfinite(m->mean)) throw WorkloadError(std::string(name) + ": negative mean");
    if (!(m->std >= 0.0) || !std::isfinite(m->std)) throw WorkloadError(std::string(name) + ": negative std");
  }
}

MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

std::vector<Job> generate_synthetic(const WorkloadStats& stats, double duration_s, std::uint64_t seed,
                                    int nodes_total, double quanta_s) {
  if (!(duration_s > 0.0)) throw WorkloadError("duration_s must be > 0");
  check_stats(stats);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  constexpr double kMinWall = 60.0;
  constexpr double kMaxWall = 12.0 * 3600.0;

  std::vector<Job> jobs;
  double t = 0.0;
  std::int64_t id = 1;
  while (true) {
    t += sample_interarrival(1.0 / stats.t_avg_s, uniform(rng));
    if (t >= duration_s) break;
    Job job;
    job.job_id = id++;
    job.job_name = "synthetic-" + std::to_string(job.job_id);
    job.submit_time = t;
    job.node_count = static_cast<int>(
        std::lround(truncated_normal(rng, stats.node_count_dist, 1.0, static_cast<double>(nodes_total))));
    job.node_count = std::clamp(job.node_count, 1, nodes_total);
    job.wall_time_s = std::round(truncated_normal(rng, stats.wall_time_dist, kMinWall, kMaxWall));
    const double cpu = truncated_normal(rng, stats.cpu_util_dist, 0.0, 1.0);
    const double gpu = truncated_normal(rng, stats.gpu_util_dist, 0.0, 1.0);
    const auto quanta = static_cast<std::size_t>(std::ceil(job.wall_time_s / quanta_s));
    job.cpu_trace = UtilTrace{quanta_s, std::vector<double>(quanta, cpu)};
    job.gpu_trace = UtilTrace{quanta_s, std::vector<double>(quanta, gpu)};
    jobs.push_back(std::move(job));
  }
  return jobs;
}

WorkloadStats derive_stats(const std::vector<Job>& jobs) {
  if (jobs.size() < 2) throw WorkloadError("derive_stats needs at least 2 jobs");
  std::vector<Job const*> sorted;
  sorted.reserve(jobs.size());
  for (const Job& j : jobs) sorted.push_back(&j);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Job* a, const Job* b) { return a->submit_time < b->submit_time; });

  std::vector<double> nodes, walls, cpus, gpus;
  for (const Job* j : sorted) {
    nodes.push_back(j->node_count);
    walls.push_back(j->wall_time_s);
    auto avg = [](const UtilTrace& tr) {
      return tr.values.empty() ? 0.0
                               : std::accumulate(tr.values.begin(), tr.values.end(), 0.0) /
                                     static_cast<double>(tr.values.size());
    };
    cpus.push_back(avg(j->cpu_trace));
    gpus.push_back(avg(j->gpu_trace));
  }
  WorkloadStats s;
  s.t_avg_s = (sorted.back()->submit_time - sorted.front()->submit_time) / static_cast<double>(sorted.size() - 1);
  s.node_count_dist = mean_std(nodes);
  s.wall_time_dist = mean_std(walls);
  s.cpu_util_dist = mean_std(cpus);
  s.gpu_util_dist = mean_std(gpus);
  return s;
}

void sort_by_submit(std::vector<Job>& jobs) {
  std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    if (a.submit_time != b.submit_time) return a.submit_time < b.submit_time;
    return a.job_id < b.job_id;
  });
}

json jobs_to_json(const std::vector<Job>& jobs, double quanta_s) {
  json arr = json::array();
  for (const Job& j : jobs) {
    json o = {{"job_id", j.job_id},
              {"job_name", j.job_name},
              {"node_count", j.node_count},
              {"submit_time", j.submit_time},
              {"wall_time_s", j.wall_time_s},
              {"cpu_util", j.cpu_trace.values},
              {"gpu_util", j.gpu_trace.values}};
    if (j.pinned_nodes) o["nodes"] = *j.pinned_nodes;
    arr.push_back(std::move(o));
  }
  return {{"quanta_s", quanta_s}, {"jobs", std::move(arr)}};
}

std::vector<Job> jobs_from_json(const json& document) {
  try {
    const double quanta = document.value("quanta_s", 15.0);
    std::vector<Job> jobs;
    for (const json& o : document.at("jobs")) {
      Job j;
      j.job_id = o.at("job_id").get<std::int64_t>();
      j.job_name = o.value("job_name", std::string{});
      j.node_count = o.at("node_count").get<int>();
      j.submit_time = o.at("submit_time").get<double>();
      j.wall_time_s = o.at("wall_time_s").get<double>();
      j.cpu_trace = UtilTrace{quanta, o.at("cpu_util").get<std::vector<double>>()};
      j.gpu_trace = UtilTrace{quanta, o.at("gpu_util").get<std::vector<double>>()};
      if (o.contains("nodes")) j.pinned_nodes = o.at("nodes").get<std::vector<int>>();
      validate_job(j);
      jobs.push_back(std::move(j));
    }
    sort_by_submit(jobs);
    return jobs;
  } catch (const json::exception& e) {
    throw WorkloadError(std::string("job list: ") + e.what());
  }
}

}  // namespace dtwin
