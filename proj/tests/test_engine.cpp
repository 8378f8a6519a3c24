#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "dtwin/engine.hpp"

using namespace dtwin;

namespace {

// same hand-written curve as the power tests, kept local
double curve_eta(double per_rect_w) {
  if (per_rect_w <= 2500.0) return 0.945;
  if (per_rect_w <= 7500.0) return 0.945 + (per_rect_w - 2500.0) / 5000.0 * (0.963 - 0.945);
  if (per_rect_w <= 10000.0) return 0.963 + (per_rect_w - 7500.0) / 2500.0 * (0.960 - 0.963);
  return 0.960;
}

double chassis_input_ac(double p_out) {
  const double dc = p_out / 0.972;
  return dc / curve_eta(dc / 4.0);
}

double machine_power(double node_w) { return 74 * 8 * chassis_input_ac(16 * node_w + 4 * 250.0) + 25 * 8700.0; }

Job flat_job(std::int64_t id, int nodes, double submit, double wall, double cpu, double gpu) {
  Job j;
  j.job_id = id;
  j.job_name = "j" + std::to_string(id);
  j.node_count = nodes;
  j.submit_time = submit;
  j.wall_time_s = wall;
  j.cpu_trace = UtilTrace{15.0, std::vector<double>(static_cast<std::size_t>(std::ceil(wall / 15.0)), cpu)};
  j.gpu_trace = UtilTrace{15.0, std::vector<double>(j.cpu_trace.values.size(), gpu)};
  return j;
}

RunResult with_series(std::vector<double> t, std::vector<double> p) {
  RunResult r;
  r.duration_s = t.back() - t.front();
  r.power.time_s = t;
  r.power.p_system_w = p;
  r.power.p_it_out_w = p;
  r.power.loss_total_w.assign(p.size(), 0.0);
  return r;
}

}  // namespace

TEST(Engine, PhasesFireInOrder) {
  SystemConfig cfg;
  cfg.simulation.cooling_enabled = true;
  cfg.simulation.cooling_warmup_s = 0.0;
  std::vector<std::pair<Phase, std::int64_t>> seen;
  EngineHooks hooks;
  hooks.on_phase = [&](Phase p, std::int64_t k, double) { seen.emplace_back(p, k); };
  RunOptions opts;
  opts.duration_s = 30.0;
  run_simulation(cfg, {}, opts, hooks);
  std::vector<std::pair<Phase, std::int64_t>> expected;
  for (std::int64_t k = 0; k <= 30; ++k) {
    for (Phase p : {Phase::Arrivals, Phase::Schedule, Phase::Release, Phase::Power, Phase::Losses}) {
      expected.emplace_back(p, k);
    }
    if (k % 15 == 0) expected.emplace_back(Phase::Cooling, k);
  }
  EXPECT_EQ(seen, expected);
}

TEST(Engine, IdleFloorEverySample) {
  SystemConfig cfg;
  RunOptions opts;
  opts.duration_s = 120.0;
  const RunResult r = run_simulation(cfg, {}, opts);
  ASSERT_EQ(r.power.size(), 121u);
  const double expected = machine_power(626.0);
  for (double p : r.power.p_system_w) EXPECT_NEAR(p, expected, 1e-6 * expected);
  EXPECT_NEAR(expected, 7.24e6, 0.03 * 7.24e6);
}

TEST(Engine, HplPlateauMatchesClosedForm) {
  SystemConfig cfg;
  RunOptions opts;
  opts.duration_s = 120.0;
  const RunResult r = run_simulation(cfg, {flat_job(1, 9472, 0.0, 600.0, 0.33, 0.79)}, opts);
  const double expected = machine_power(152.7 + 4 * 460.88 + 184.0);
  for (double p : r.power.p_system_w) EXPECT_NEAR(p, expected, 1e-6 * expected);
  EXPECT_EQ(r.power.nodes_busy.back(), 9472);
  EXPECT_EQ(r.saturated_chassis_ticks, 0);
}

TEST(Engine, EnergyBucketsAddUp) {
  SystemConfig cfg;
  RunOptions opts;
  opts.duration_s = 1800.0;
  const auto jobs = generate_synthetic(WorkloadStats{}, opts.duration_s, 11);
  const RunResult r = run_simulation(cfg, jobs, opts);
  const PowerSeries& ps = r.power;
  const double e_sys = trapezoid(ps.time_s, ps.p_system_w);
  const double e_parts = trapezoid(ps.time_s, ps.p_it_out_w) + trapezoid(ps.time_s, ps.loss_total_w) +
                         25 * 8700.0 * r.duration_s;
  EXPECT_NEAR(e_parts / e_sys, 1.0, 1e-9);
  // splitting the window does not change the integral
  const std::size_t mid = ps.size() / 2;
  auto slice = [&](std::size_t a, std::size_t b, const std::vector<double>& v) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(a), v.begin() + static_cast<std::ptrdiff_t>(b));
  };
  const double halves = trapezoid(slice(0, mid + 1, ps.time_s), slice(0, mid + 1, ps.p_system_w)) +
                        trapezoid(slice(mid, ps.size(), ps.time_s), slice(mid, ps.size(), ps.p_system_w));
  EXPECT_NEAR(halves / e_sys, 1.0, 1e-9);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_NEAR(ps.loss_rectifier_w[i] + ps.loss_sivoc_w[i], ps.loss_total_w[i], 1e-6);
  }
}

TEST(Engine, DeterministicAndExecIndependent) {
  SystemConfig cfg;
  cfg.simulation.cooling_enabled = true;
  cfg.simulation.cooling_warmup_s = 300.0;
  RunOptions opts;
  opts.duration_s = 900.0;
  const auto jobs = generate_synthetic(WorkloadStats{}, opts.duration_s, 3);
  const RunResult a = run_simulation(cfg, jobs, opts);
  opts.exec = Exec::Serial;
  const RunResult b = run_simulation(cfg, jobs, opts);
  EXPECT_EQ(a.power.p_system_w, b.power.p_system_w);
  EXPECT_EQ(a.allocations, b.allocations);
  ASSERT_EQ(a.cooling.size(), b.cooling.size());
  for (std::size_t i = 0; i < a.cooling.size(); ++i) EXPECT_EQ(flatten(a.cooling[i]), flatten(b.cooling[i]));
}

TEST(Engine, JobsRunForTheirWallTime) {
  SystemConfig cfg;
  RunOptions opts;
  opts.duration_s = 400.0;
  std::vector<Job> jobs = {flat_job(1, 100, 0.0, 60.0, 0.5, 0.5), flat_job(2, 9472, 5.0, 30.0, 0.1, 0.1),
                           flat_job(3, 20000, 6.0, 30.0, 0.1, 0.1), flat_job(4, 10, 500.0, 30.0, 0.1, 0.1)};
  const RunResult r = run_simulation(cfg, jobs, opts);
  ASSERT_EQ(r.jobs.size(), 3u);  // job 4 arrives after the end
  EXPECT_EQ(r.jobs[0].state, JobState::Completed);
  EXPECT_DOUBLE_EQ(*r.jobs[0].end_time - *r.jobs[0].start_time, 60.0);
  // FCFS: the full-machine job waits for job 1; nodes freed at 60 are scheduled on the next tick
  EXPECT_DOUBLE_EQ(*r.jobs[1].start_time, 61.0);
  EXPECT_EQ(r.jobs[2].state, JobState::Rejected);
  EXPECT_EQ(r.power.jobs_completed.back(), 2);
  EXPECT_EQ(r.power.jobs_rejected.back(), 1);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Engine, RejectsUnsortedJobsAndBadDuration) {
  SystemConfig cfg;
  RunOptions opts;
  opts.duration_s = 10.0;
  EXPECT_THROW(run_simulation(cfg, {flat_job(1, 1, 5, 15, 0, 0), flat_job(2, 1, 1, 15, 0, 0)}, opts), EngineError);
  opts.duration_s = -1.0;
  EXPECT_THROW(run_simulation(cfg, {}, opts), EngineError);
}

TEST(Engine, CancelFlagStopsRun) {
  SystemConfig cfg;
  std::atomic<bool> cancel{false};
  EngineHooks hooks;
  hooks.cancel = &cancel;
  hooks.on_progress = [&](double f) {
    if (f > 0.2) cancel = true;
  };
  RunOptions opts;
  opts.duration_s = 3600.0;
  EXPECT_THROW(run_simulation(cfg, {}, opts, hooks), RunCancelled);
}

TEST(Engine, WetbulbSeriesIsInterpolated) {
  SystemConfig cfg;
  cfg.simulation.cooling_enabled = true;
  cfg.simulation.cooling_warmup_s = 0.0;
  RunOptions opts;
  opts.duration_s = 60.0;
  opts.wetbulb = TimeSeries{{0.0, 60.0}, {10.0, 20.0}};
  const RunResult r = run_simulation(cfg, {}, opts);
  ASSERT_EQ(r.cooling.size(), 5u);
  EXPECT_DOUBLE_EQ(r.cooling[0].wetbulb_c, 10.0);
  EXPECT_DOUBLE_EQ(r.cooling[2].wetbulb_c, 15.0);
  EXPECT_DOUBLE_EQ(r.cooling[4].wetbulb_c, 20.0);
}

TEST(Report, DayAtConstantPower) {
  RunResult r = with_series({0.0, 86400.0}, {16.9e6, 16.9e6});
  const Report rep = make_report(r);
  EXPECT_NEAR(rep.total_energy_mwh, 405.6, 1e-9);
  EXPECT_NEAR(rep.avg_power_mw, 16.9, 1e-12);
  EXPECT_NEAR(rep.energy_cost_usd, 405.6 * 1000 * 0.09, 1e-6);
}

TEST(Report, EmissionsExample) {
  // 405.6 * 852.3 / 2204.6 / 0.933
  EXPECT_NEAR(co2_tons(405.6, EconomicsParams{}, 0.933), 168.06, 0.01);
  EXPECT_DOUBLE_EQ(co2_tons(1.0, EconomicsParams{}, 0.0), 0.0);
}

TEST(Report, ZeroDurationIsAllZero) {
  RunResult r;
  r.power.time_s = {0.0};
  r.power.p_system_w = {1e6};
  const Report rep = make_report(r);
  for (const auto& [name, v] : report_fields(rep)) EXPECT_EQ(v, 0.0) << name;
}

TEST(Report, LossAndEfficiency) {
  RunResult r = with_series({0.0, 10.0}, {100.0, 100.0});
  r.power.p_it_out_w = {93.0, 93.0};
  r.power.loss_total_w = {7.0, 7.0};
  const Report rep = make_report(r);
  EXPECT_NEAR(rep.loss_pct, 7.0, 1e-12);
  EXPECT_NEAR(rep.eta_system, 0.93, 1e-12);
}

TEST(Report, JsonRoundTripAndStrictness) {
  Report rep;
  rep.eta_system = 0.93;
  rep.jobs_completed = 17;
  const Report back = report_from_json(report_to_json(rep));
  EXPECT_EQ(report_fields(back), report_fields(rep));
  nlohmann::json bad = report_to_json(rep);
  bad["loss_pct"] = "high";
  EXPECT_ANY_THROW(report_from_json(bad));
}

TEST(Compare, IdenticalOffsetAndAlternating) {
  TimeSeries a{{0, 1, 2, 3}, {10e6, 11e6, 12e6, 13e6}};
  ErrorMetrics m = compare_series(a, a);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.samples, 4u);
  TimeSeries b = a;
  for (double& v : b.value) v += 1e6;
  m = compare_series(a, b);
  EXPECT_NEAR(m.rmse, 1e6, 1e-6);
  EXPECT_NEAR(m.mae, 1e6, 1e-6);
  TimeSeries c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.value[i] += i % 2 ? -1e6 : 1e6;
  m = compare_series(a, c);
  EXPECT_NEAR(m.rmse, 1e6, 1e-6);
  EXPECT_NEAR(m.mae, 1e6, 1e-6);
}

TEST(Compare, NearestSampleAlignmentAndNoOverlap) {
  TimeSeries pred{{0, 10, 20}, {1.0, 2.0, 3.0}};
  TimeSeries meas{{4, 6, 19, 30}, {1.0, 2.0, 3.0, 9.0}};
  const ErrorMetrics m = compare_series(pred, meas);
  EXPECT_EQ(m.samples, 3u);  // t=30 outside the predicted range
  EXPECT_NEAR(m.mae, 0.0, 1e-12);
  EXPECT_ANY_THROW(compare_series(pred, TimeSeries{{100, 200}, {1, 2}}));
}

TEST(Ensemble, IdenticalSeedsHaveZeroSpread) {
  SystemConfig cfg;
  const EnsembleTable t = run_ensemble(cfg, WorkloadStats{}, std::vector<std::uint64_t>{5, 5, 5}, 600.0);
  for (const auto& [name, s] : t.fields) EXPECT_EQ(s.std, 0.0) << name;
  EXPECT_EQ(t.reports.size(), 3u);
}

TEST(Ensemble, AggregateBounds) {
  SystemConfig cfg;
  const EnsembleTable t = run_ensemble(cfg, WorkloadStats{}, 4, 900.0);
  EXPECT_EQ(t.seeds, (std::vector<std::uint64_t>{0, 1, 2, 3}));
  for (const auto& [name, s] : t.fields) {
    EXPECT_LE(s.min, s.avg) << name;
    EXPECT_LE(s.avg, s.max) << name;
    EXPECT_GE(s.std, 0.0) << name;
  }
  // sample std by hand for one field
  double mean = 0.0, ss = 0.0;
  for (const Report& r : t.reports) mean += r.avg_power_mw / 4.0;
  for (const Report& r : t.reports) ss += (r.avg_power_mw - mean) * (r.avg_power_mw - mean);
  EXPECT_NEAR(t.field("avg_power_mw").std, std::sqrt(ss / 3.0), 1e-9);
  EXPECT_NO_THROW(t.to_json().dump());
  EXPECT_THROW(run_ensemble(cfg, WorkloadStats{}, 1, 60.0), EngineError);
}
