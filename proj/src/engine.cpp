#include "dtwin/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>

namespace dtwin {

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Arrivals: return "arrivals";
    case Phase::Schedule: return "schedule";
    case Phase::Release: return "release";
    case Phase::Power: return "power";
    case Phase::Losses: return "losses";
    case Phase::Cooling: return "cooling";
  }
  return "?";
}

std::string to_string(JobState state) {
  switch (state) {
    case JobState::Pending: return "PENDING";
    case JobState::Running: return "RUNNING";
    case JobState::Completed: return "COMPLETED";
    case JobState::Rejected: return "REJECTED";
  }
  return "?";
}

void PowerSeries::reserve(std::size_t n) {
  for (auto* v : {&time_s, &p_system_w, &p_it_out_w, &loss_rectifier_w, &loss_sivoc_w, &loss_total_w, &eta_system}) {
    v->reserve(n);
  }
  for (auto* v : {&nodes_busy, &jobs_submitted, &jobs_pending, &jobs_running, &jobs_completed, &jobs_rejected}) {
    v->reserve(n);
  }
  p_cdu_group_w.reserve(n * static_cast<std::size_t>(num_cdus));
}

void PowerSeries::push(const PowerSample& s) {
  time_s.push_back(s.time_s);
  p_system_w.push_back(s.p_system_w);
  p_it_out_w.push_back(s.p_it_out_w);
  loss_rectifier_w.push_back(s.loss_rectifier_w);
  loss_sivoc_w.push_back(s.loss_sivoc_w);
  loss_total_w.push_back(s.loss_total_w);
  eta_system.push_back(s.eta_system);
  p_cdu_group_w.insert(p_cdu_group_w.end(), s.p_cdu_group_w.begin(), s.p_cdu_group_w.end());
}

namespace {

double interpolate(const TimeSeries& ts, double t, double fallback) {
  if (ts.time_s.empty()) return fallback;
  if (t <= ts.time_s.front()) return ts.value.front();
  if (t >= ts.time_s.back()) return ts.value.back();
  auto hi = std::upper_bound(ts.time_s.begin(), ts.time_s.end(), t);
  const std::size_t i = static_cast<std::size_t>(hi - ts.time_s.begin());
  const double t0 = ts.time_s[i - 1], t1 = ts.time_s[i];
  const double f = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
  return ts.value[i - 1] + f * (ts.value[i] - ts.value[i - 1]);
}

struct RunningJob {
  const Job* job;
  double start;
  double end;
  std::size_t record;
};

}  // namespace

RunResult run_simulation(const SystemConfig& config, const std::vector<Job>& jobs, const RunOptions& options,
                         const EngineHooks& hooks) {
  validate(config);
  if (!(options.duration_s >= 0.0) || !std::isfinite(options.duration_s)) {
    throw EngineError("duration must be finite and >= 0");
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    validate_job(jobs[i]);
    if (i > 0 && jobs[i].submit_time < jobs[i - 1].submit_time) {
      throw EngineError("jobs must be sorted by submit_time");
    }
  }
  if (options.wetbulb.time_s.size() != options.wetbulb.value.size()) {
    throw EngineError("wetbulb series has mismatched columns");
  }

  const auto wall_start = std::chrono::steady_clock::now();
  const SimulationParams& sim = config.simulation;
  const Topology& topo = config.topology;
  const double tick = sim.tick_s;
  const auto ticks = static_cast<std::int64_t>(std::floor(options.duration_s / tick + 1e-9));
  const int stride = sim.cooling_stride_ticks;

  RunResult r;
  r.config = config;
  r.seed = sim.seed;
  r.duration_s = static_cast<double>(ticks) * tick;
  r.power.num_cdus = topo.num_cdus;
  r.power.reserve(static_cast<std::size_t>(ticks + 1));
  r.jobs.reserve(jobs.size());

  PowerModel model(config);
  CoolingModel cooling(config);
  CoolingState cooling_state;
  NodePool pool(topo.nodes_total);
  PendingQueue queue(sim.policy);
  std::vector<RunningJob> running;
  std::set<std::int64_t> conflicted;

  std::vector<double> cpu(static_cast<std::size_t>(topo.nodes_total), 0.0);
  std::vector<double> gpu(cpu.size(), 0.0);
  std::vector<double> p_node(cpu.size(), 0.0);
  std::vector<RackPower> racks(static_cast<std::size_t>(model.racks()));

  std::size_t next_job = 0;
  int submitted = 0, completed = 0, rejected = 0;
  std::unordered_map<std::int64_t, std::size_t> record_by_id;

  auto fire = [&](Phase ph, std::int64_t k, double now) {
    if (hooks.on_phase) hooks.on_phase(ph, k, now);
  };
  const std::int64_t progress_every = std::max<std::int64_t>(1, (ticks + 1) / 100);

  for (std::int64_t k = 0; k <= ticks; ++k) {
    const double now = static_cast<double>(k) * tick;
    if (hooks.cancel && hooks.cancel->load(std::memory_order_relaxed)) throw RunCancelled();

    // arrivals
    while (next_job < jobs.size() && jobs[next_job].submit_time <= now) {
      const Job& j = jobs[next_job];
      JobRecord rec;
      rec.job_id = j.job_id;
      rec.job_name = j.job_name;
      rec.node_count = j.node_count;
      rec.submit_time = j.submit_time;
      rec.wall_time_s = j.wall_time_s;
      record_by_id[j.job_id] = r.jobs.size();
      r.jobs.push_back(std::move(rec));
      queue.push(j, now);
      ++submitted;
      ++next_job;
    }
    fire(Phase::Arrivals, k, now);

    // schedule
    ScheduleOutcome outcome = schedule_jobs(queue, pool, now);
    for (Allocation& a : outcome.allocations) {
      const std::size_t rec = record_by_id.at(a.job_id);
      r.jobs[rec].state = JobState::Running;
      r.jobs[rec].start_time = now;
      running.push_back({a.job, now, now + a.job->wall_time_s, rec});
      r.allocations.push_back({now, a.job_id, AllocationKind::Start, std::move(a.nodes)});
    }
    for (const Rejection& rj : outcome.rejected) {
      JobRecord& rec = r.jobs[record_by_id.at(rj.job_id)];
      rec.state = JobState::Rejected;
      rec.note = rj.reason;
      r.warnings.push_back("job " + std::to_string(rj.job_id) + " rejected: " + rj.reason);
      ++rejected;
    }
    for (ReplayConflict& c : outcome.conflicts) {
      if (conflicted.insert(c.job_id).second) r.conflicts.push_back(std::move(c));
    }
    fire(Phase::Schedule, k, now);

    // advance running jobs, release completions
    for (std::size_t i = 0; i < running.size();) {
      const RunningJob& rj = running[i];
      if (rj.end <= now) {
        std::vector<int> nodes = pool.release(rj.job->job_id);
        for (int n : nodes) cpu[n] = gpu[n] = 0.0;
        JobRecord& rec = r.jobs[rj.record];
        rec.state = JobState::Completed;
        rec.end_time = now;
        r.allocations.push_back({now, rj.job->job_id, AllocationKind::End, std::move(nodes)});
        ++completed;
        running[i] = running.back();
        running.pop_back();
      } else {
        ++i;
      }
    }
    for (const RunningJob& rj : running) {
      const double elapsed = now - rj.start;
      const double c = rj.job->cpu_trace.at(elapsed);
      const double g = rj.job->gpu_trace.at(elapsed);
      for (int n : pool.nodes_of(rj.job->job_id)) {
        cpu[n] = c;
        gpu[n] = g;
      }
    }
    fire(Phase::Release, k, now);

    // power, then conversion losses and rack/CDU aggregation
    model.node_powers(cpu.data(), gpu.data(), p_node.data(), options.exec);
    fire(Phase::Power, k, now);
    model.rack_powers(p_node.data(), racks.data(), options.exec);
    PowerSample sample = system_power(racks, config);
    sample.time_s = now;
    if (!std::isfinite(sample.p_system_w)) {
      throw EngineError("non-finite system power at tick " + std::to_string(k));
    }
    r.saturated_chassis_ticks += sample.saturated_chassis;
    r.power.push(sample);
    r.power.nodes_busy.push_back(topo.nodes_total - pool.free_count());
    r.power.jobs_submitted.push_back(submitted);
    r.power.jobs_pending.push_back(static_cast<int>(queue.size()));
    r.power.jobs_running.push_back(static_cast<int>(running.size()));
    r.power.jobs_completed.push_back(completed);
    r.power.jobs_rejected.push_back(rejected);
    fire(Phase::Losses, k, now);

    // cooling stride
    if (sim.cooling_enabled && k % stride == 0) {
      const std::size_t last = r.power.size() - 1;
      const std::size_t first = last >= static_cast<std::size_t>(stride) ? last - stride + 1 : 0;
      const double span = static_cast<double>(last - first + 1);
      CoolingInputs in;
      in.cdu_heat_w.assign(static_cast<std::size_t>(topo.num_cdus), 0.0);
      double p_sys = 0.0;
      for (std::size_t s = first; s <= last; ++s) {
        for (int c = 0; c < topo.num_cdus; ++c) in.cdu_heat_w[c] += r.power.cdu_group(s, c);
        p_sys += r.power.p_system_w[s];
      }
      for (double& h : in.cdu_heat_w) h = cooling_feed(h / span, sim.cooling_efficiency);
      in.system_power_w = p_sys / span;
      in.wetbulb_c = interpolate(options.wetbulb, now, sim.wetbulb_c);
      try {
        CoolingStep st = k == 0 ? cooling.warmup(in, sim.cooling_warmup_s, stride * tick)
                                : cooling.step(cooling_state, in, stride * tick);
        cooling_state = std::move(st.state);
        st.outputs.time_s = now;
        r.cooling.push_back(std::move(st.outputs));
      } catch (const CoolingError& e) {
        throw EngineError("cooling failed at tick " + std::to_string(k) + ": " + e.what());
      }
      fire(Phase::Cooling, k, now);
    }

    if (hooks.on_progress && (k % progress_every == 0 || k == ticks)) {
      hooks.on_progress(static_cast<double>(k + 1) / static_cast<double>(ticks + 1));
    }
  }

  for (const PendingEntry& e : queue.entries()) r.jobs[record_by_id.at(e.job->job_id)].state = JobState::Pending;
  if (r.saturated_chassis_ticks > 0) {
    r.warnings.push_back("rectifier saturation: " + std::to_string(r.saturated_chassis_ticks) +
                         " chassis-ticks above rectifier rated capacity");
  }
  if (!r.conflicts.empty()) {
    r.warnings.push_back(std::to_string(r.conflicts.size()) + " replay jobs waited for busy pinned nodes");
  }
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return r;
}

// ---------------------------------------------------------------------------

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  double sum = 0.0;
  for (std::size_t i = 1; i < t.size() && i < y.size(); ++i) sum += 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]);
  return sum;
}

double co2_tons(double energy_mwh, const EconomicsParams& e, double eta_system) {
  if (!(eta_system > 0.0)) return 0.0;
  return energy_mwh * e.emission_intensity_lbs_per_mwh / e.lbs_per_metric_ton / eta_system;
}

Report make_report(const RunResult& result) { return make_report(result, result.config.economics); }

Report make_report(const RunResult& result, const EconomicsParams& economics) {
  Report rep;
  const PowerSeries& ps = result.power;
  if (ps.size() < 2 || result.duration_s <= 0.0) return rep;
  const double T = result.duration_s;
  constexpr double kJoulePerMwh = 3.6e9;
  const double e_sys = trapezoid(ps.time_s, ps.p_system_w);
  const double e_out = trapezoid(ps.time_s, ps.p_it_out_w);
  const double e_loss = trapezoid(ps.time_s, ps.loss_total_w);
  rep.duration_s = T;
  rep.jobs_completed = ps.jobs_completed.empty() ? 0 : ps.jobs_completed.back();
  rep.throughput_jobs_per_hr = static_cast<double>(rep.jobs_completed) / (T / 3600.0);
  rep.total_energy_mwh = e_sys / kJoulePerMwh;
  rep.it_energy_mwh = e_out / kJoulePerMwh;
  rep.avg_power_mw = e_sys / T / 1e6;
  rep.loss_mw = e_loss / T / 1e6;
  rep.loss_pct = e_sys > 0.0 ? 100.0 * e_loss / e_sys : 0.0;
  rep.eta_system = (e_out + e_loss) > 0.0 ? e_out / (e_out + e_loss) : 1.0;
  rep.co2_tons = co2_tons(rep.total_energy_mwh, economics, rep.eta_system);
  rep.energy_cost_usd = rep.total_energy_mwh * 1000.0 * economics.electricity_usd_per_kwh;
  if (!result.cooling.empty()) {
    double sum = 0.0;
    for (const CoolingOutputs& c : result.cooling) sum += c.pue;
    rep.avg_pue = sum / static_cast<double>(result.cooling.size());
  }
  return rep;
}

std::vector<std::pair<std::string, double>> report_fields(const Report& r) {
  return {{"duration_s", r.duration_s},
          {"jobs_completed", static_cast<double>(r.jobs_completed)},
          {"throughput_jobs_per_hr", r.throughput_jobs_per_hr},
          {"avg_power_mw", r.avg_power_mw},
          {"total_energy_mwh", r.total_energy_mwh},
          {"it_energy_mwh", r.it_energy_mwh},
          {"loss_mw", r.loss_mw},
          {"loss_pct", r.loss_pct},
          {"eta_system", r.eta_system},
          {"co2_tons", r.co2_tons},
          {"energy_cost_usd", r.energy_cost_usd},
          {"avg_pue", r.avg_pue}};
}

nlohmann::json report_to_json(const Report& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : report_fields(r)) j[k] = v;
  j["jobs_completed"] = r.jobs_completed;
  return j;
}

Report report_from_json(const nlohmann::json& j) {
  Report r;
  try {
    r.duration_s = j.value("duration_s", 0.0);
    r.jobs_completed = j.value("jobs_completed", std::int64_t{0});
    r.throughput_jobs_per_hr = j.value("throughput_jobs_per_hr", 0.0);
    r.avg_power_mw = j.value("avg_power_mw", 0.0);
    r.total_energy_mwh = j.value("total_energy_mwh", 0.0);
    r.it_energy_mwh = j.value("it_energy_mwh", 0.0);
    r.loss_mw = j.value("loss_mw", 0.0);
    r.loss_pct = j.value("loss_pct", 0.0);
    r.eta_system = j.value("eta_system", 0.0);
    r.co2_tons = j.value("co2_tons", 0.0);
    r.energy_cost_usd = j.value("energy_cost_usd", 0.0);
    r.avg_pue = j.value("avg_pue", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw EngineError(std::string("malformed report: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------

ErrorMetrics compare_series(const TimeSeries& predicted, const TimeSeries& measured) {
  if (predicted.size() == 0 || measured.size() == 0) throw EngineError("empty series");
  const double lo = std::max(predicted.time_s.front(), measured.time_s.front());
  const double hi = std::min(predicted.time_s.back(), measured.time_s.back());
  if (lo > hi) throw EngineError("series do not overlap in time");
  ErrorMetrics m;
  double sq = 0.0, abs_sum = 0.0;
  const auto& pt = predicted.time_s;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double t = measured.time_s[i];
    if (t < lo || t > hi) continue;
    auto it = std::lower_bound(pt.begin(), pt.end(), t);
    std::size_t j = static_cast<std::size_t>(it - pt.begin());
    if (j == pt.size() || (j > 0 && t - pt[j - 1] <= pt[j] - t)) j = j == 0 ? 0 : j - 1;
    const double err = predicted.value[j] - measured.value[i];
    sq += err * err;
    abs_sum += std::abs(err);
    ++m.samples;
  }
  if (m.samples == 0) throw EngineError("series do not overlap in time");
  m.rmse = std::sqrt(sq / static_cast<double>(m.samples));
  m.mae = abs_sum / static_cast<double>(m.samples);
  return m;
}

ErrorMetrics compare_with_measured(const RunResult& result, const TimeSeries& measured_power_w) {
  return compare_series({result.power.time_s, result.power.p_system_w}, measured_power_w);
}

// ---------------------------------------------------------------------------

const FieldStats& EnsembleTable::field(const std::string& name) const {
  for (const auto& [k, v] : fields) {
    if (k == name) return v;
  }
  throw EngineError("unknown report field " + name);
}

nlohmann::json EnsembleTable::to_json() const {
  nlohmann::json j;
  j["seeds"] = seeds;
  j["runs"] = nlohmann::json::array();
  for (const Report& r : reports) j["runs"].push_back(report_to_json(r));
  for (const auto& [k, s] : fields) j["fields"][k] = {{"min", s.min}, {"avg", s.avg}, {"max", s.max}, {"std", s.std}};
  return j;
}

EnsembleTable aggregate_reports(const std::vector<Report>& reports) {
  EnsembleTable t;
  t.reports = reports;
  if (reports.empty()) return t;
  const auto names = report_fields(reports.front());
  for (std::size_t f = 0; f < names.size(); ++f) {
    std::vector<double> xs;
    xs.reserve(reports.size());
    for (const Report& r : reports) xs.push_back(report_fields(r)[f].second);
    FieldStats s;
    s.min = *std::min_element(xs.begin(), xs.end());
    s.max = *std::max_element(xs.begin(), xs.end());
    // shifted by the first value, so identical inputs give exactly zero spread
    const double k = xs.front();
    double sum = 0.0, sq = 0.0;
    for (double x : xs) {
      sum += x - k;
      sq += (x - k) * (x - k);
    }
    const double n = static_cast<double>(xs.size());
    s.avg = k + sum / n;
    if (xs.size() > 1) s.std = std::sqrt(std::max(0.0, (sq - sum * sum / n) / (n - 1.0)));
    s.avg = std::clamp(s.avg, s.min, s.max);
    t.fields.emplace_back(names[f].first, s);
  }
  return t;
}

EnsembleTable run_ensemble(const SystemConfig& config, const WorkloadStats& stats,
                           const std::vector<std::uint64_t>& seeds, double duration_s) {
  if (seeds.size() < 2) throw EngineError("an ensemble needs at least 2 seeds");
  std::vector<Report> reports(seeds.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const int n = static_cast<int>(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    try {
      SystemConfig cfg = config;
      cfg.simulation.seed = seeds[i];
      const auto jobs = generate_synthetic(stats, duration_s, seeds[i], cfg.topology.nodes_total,
                                           cfg.simulation.trace_quanta_s);
      RunOptions opts;
      opts.duration_s = duration_s;
      opts.exec = Exec::Serial;
      reports[i] = make_report(run_simulation(cfg, jobs, opts));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  EnsembleTable t = aggregate_reports(reports);
  t.seeds = seeds;
  return t;
}

EnsembleTable run_ensemble(const SystemConfig& config, const WorkloadStats& stats, int n_seeds,
                           double duration_s) {
  if (n_seeds < 2) throw EngineError("an ensemble needs at least 2 seeds");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n_seeds; ++i) seeds.push_back(config.simulation.seed + static_cast<std::uint64_t>(i));
  return run_ensemble(config, stats, seeds, duration_s);
}

}  // namespace dtwin
