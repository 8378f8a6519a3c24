#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dtwin/series_io.hpp"

using namespace dtwin;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("dtwin_series_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

RunResult small_run(bool cooling) {
  SystemConfig cfg;
  cfg.simulation.cooling_enabled = cooling;
  cfg.simulation.cooling_warmup_s = 300.0;
  RunOptions opts;
  opts.duration_s = 120.0;
  return run_simulation(cfg, generate_synthetic(WorkloadStats{}, 120.0, 4), opts);
}

}  // namespace

TEST(Csv, ParseSkipsCommentsAndBlankLines) {
  const CsvTable t = parse_csv("# note\ntime_s,x\n\n0,1.5\n1,2.5\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"time_s", "x"}));
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.numeric_column("x"), (std::vector<double>{1.5, 2.5}));
  EXPECT_EQ(t.column_index("nope"), -1);
  EXPECT_THROW(t.numeric_column("nope"), SeriesError);
  EXPECT_THROW(parse_csv("a,b\n1\n"), SeriesError);
  EXPECT_THROW(parse_csv("a\nxyz\n").numeric_column("a"), SeriesError);
}

TEST(Csv, AtomicWriteReplacesAndLeavesNoTemp) {
  const fs::path dir = scratch("atomic");
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  EXPECT_EQ(read_file(dir / "f.txt"), "two");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
  fs::remove_all(dir);
}

TEST(Csv, NodeRanges) {
  EXPECT_EQ(node_ranges({}), "");
  EXPECT_EQ(node_ranges({5}), "5");
  EXPECT_EQ(node_ranges({0, 1, 2, 3, 32}), "0-3;32");
  EXPECT_EQ(node_ranges({9, 1, 2}), "1-2;9");
}

TEST(Csv, PowerRoundTrip) {
  const RunResult r = small_run(false);
  const CsvTable t = parse_csv(power_csv(r.power));
  EXPECT_EQ(t.header.front(), "time_s");
  EXPECT_EQ(std::vector<std::string>(t.header.begin() + 1, t.header.end()), power_metric_names(25));
  ASSERT_EQ(t.rows.size(), r.power.size());
  const auto p = t.numeric_column("p_system_w");
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], r.power.p_system_w[i], 1e-9 * p[i]);
  const TimeSeries a = metric_series(r, "loss_pct");
  const TimeSeries b = metric_series_from_csv(t, "loss_pct");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.value[i], b.value[i], 1e-8);
  EXPECT_NEAR(a.value[0], 100.0 * r.power.loss_total_w[0] / r.power.p_system_w[0], 1e-9);
  EXPECT_THROW(metric_series(r, "not_a_metric"), SeriesError);
}

TEST(Csv, CoolingHeaderIsSchemaThenDiagnostics) {
  const RunResult r = small_run(true);
  const CsvTable t = parse_csv(cooling_csv(r.cooling, r.config.topology, r.config.cooling));
  const auto names = cooling_output_names(r.config.topology, r.config.cooling);
  ASSERT_EQ(t.header.size(), 1 + names.size() + cooling_diagnostic_names().size());
  EXPECT_EQ(t.header[0], "time_s");
  EXPECT_TRUE(std::equal(names.begin(), names.end(), t.header.begin() + 1));
  EXPECT_EQ(t.rows.size(), r.cooling.size());
  const TimeSeries pue = metric_series(r, "pue");
  const TimeSeries back = metric_series_from_csv(t, "pue");
  ASSERT_EQ(back.size(), pue.size());
  for (std::size_t i = 0; i < pue.size(); ++i) EXPECT_NEAR(back.value[i], pue.value[i], 1e-8);
}

TEST(Downsample, HundredTwentySamplesStrideSixty) {
  TimeSeries s;
  for (int i = 0; i < 120; ++i) {
    s.time_s.push_back(i);
    s.value.push_back(i);
  }
  const TimeSeries d = downsample(s, 60);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.time_s[0], 0.0);
  EXPECT_DOUBLE_EQ(d.value[0], 29.5);
  EXPECT_DOUBLE_EQ(d.time_s[1], 60.0);
  EXPECT_DOUBLE_EQ(d.value[1], 89.5);
  // partial final window
  const TimeSeries e = downsample(s, 50);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_DOUBLE_EQ(e.value[2], 109.5);
  EXPECT_EQ(downsample(s, 1).value, s.value);
  EXPECT_THROW(downsample(s, 0), SeriesError);
}

TEST(Export, WritesAllFiles) {
  const fs::path dir = scratch("export");
  const RunResult r = small_run(true);
  export_run(r, dir);
  for (const char* f : {"power.csv", "cooling.csv", "jobs.csv", "allocations.csv", "report.json", "warnings.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto rep = nlohmann::json::parse(read_file(dir / "report.json"));
  EXPECT_NEAR(rep.at("avg_power_mw").get<double>(), make_report(r).avg_power_mw, 1e-9);
  const CsvTable jobs = read_csv(dir / "jobs.csv");
  EXPECT_EQ(jobs.rows.size(), r.jobs.size());
  const CsvTable alloc = read_csv(dir / "allocations.csv");
  EXPECT_EQ(alloc.rows.size(), r.allocations.size());
  fs::remove_all(dir);
}

TEST(Import, MeasuredAndWetbulb) {
  const fs::path dir = scratch("import");
  write_text(dir / "m.csv", "time_s,power_w\n0,1e7\n60,1.1e7\n");
  write_text(dir / "w.csv", "time_s,wetbulb_c\n0,12\n3600,18\n");
  write_text(dir / "bad.csv", "time_s,power_w\n10,1\n5,2\n");
  const TimeSeries m = read_measured_power_csv(dir / "m.csv");
  EXPECT_EQ(m.value, (std::vector<double>{1e7, 1.1e7}));
  EXPECT_EQ(read_wetbulb_csv(dir / "w.csv").value.back(), 18.0);
  EXPECT_THROW(read_measured_power_csv(dir / "bad.csv"), SeriesError);
  EXPECT_THROW(read_wetbulb_csv(dir / "m.csv"), SeriesError);
  fs::remove_all(dir);
}

TEST(Cosim, FileDrivenStepping) {
  const fs::path dir = scratch("cosim");
  std::string text = "time_s,wetbulb_temperature";
  for (int c = 0; c < 25; ++c) text += ",rack_power_" + std::string(c < 10 ? "0" : "") + std::to_string(c);
  text += "\n";
  for (int k = 0; k < 5; ++k) {
    text += std::to_string(k * 15) + ",16";
    for (int c = 0; c < 25; ++c) text += ",600000";
    text += "\n";
  }
  write_text(dir / "in.csv", text);
  SystemConfig cfg;
  const auto recs = read_cosim_inputs(dir / "in.csv", 25);
  ASSERT_EQ(recs.size(), 5u);
  EXPECT_DOUBLE_EQ(recs[0].inputs.cdu_heat_w[24], 6e5);
  EXPECT_FALSE(recs[0].inputs.system_power_w.has_value());
  CoolingModel model(cfg);
  const std::string out = run_cosim(model, cfg.topology, recs, 600.0);
  const CsvTable t = parse_csv(out);
  EXPECT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.numeric_column("time_s").back(), 60.0);
  // same answer as stepping the model by hand
  CoolingStep st = model.warmup(recs[0].inputs, 600.0);
  for (int k = 1; k < 5; ++k) st = model.step(st.state, recs[k].inputs, 15.0);
  EXPECT_NEAR(t.numeric_column("pue").back(), st.outputs.pue, 1e-8);
  EXPECT_THROW(read_cosim_inputs(dir / "in.csv", 26), SeriesError);
  fs::remove_all(dir);
}
