// dtwin: command-line front end for the simulator and the run service.

#include <CLI11.hpp>
#include <httplib.h>

#include <cctype>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dtwin/engine.hpp"
#include "dtwin/http_api.hpp"
#include "dtwin/run_store.hpp"
#include "dtwin/scenario.hpp"
#include "dtwin/series_io.hpp"
#include "dtwin/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dtwin;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::string> store;
  std::optional<std::string> policy;
  std::optional<std::string> loss_mode;
  std::optional<std::string> seed;
  std::optional<std::string> cooling;
  double duration_s = 3600.0;
  std::string wetbulb_csv;
  std::string out_dir;
  std::string label;
  bool serial = false;
  bool quiet = false;
};

fs::path store_root(const Common& c) {
  return resolve_setting(c.store, "DTWIN_STORE", std::nullopt).value_or("dtwin-store");
}

std::string upper(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

// flag > environment > config file
SystemConfig resolve_config(const Common& c) {
  SystemConfig cfg = c.config_path.empty() ? SystemConfig{} : load_config(c.config_path);
  json overrides = json::object();
  if (auto v = resolve_setting(c.policy, "DTWIN_POLICY", std::nullopt)) overrides["simulation"]["policy"] = upper(*v);
  if (auto v = resolve_setting(c.loss_mode, "DTWIN_LOSS_MODE", std::nullopt)) overrides["loss_model"]["mode"] = upper(*v);
  if (auto v = resolve_setting(c.seed, "DTWIN_SEED", std::nullopt)) {
    try {
      overrides["simulation"]["seed"] = std::stoull(*v);
    } catch (const std::exception&) {
      throw ConfigError("simulation.seed", "not an unsigned integer: " + *v);
    }
  }
  if (auto v = resolve_setting(c.cooling, "DTWIN_COOLING", std::nullopt)) {
    if (*v != "on" && *v != "off") throw ConfigError("simulation.cooling_enabled", "expected on or off");
    overrides["simulation"]["cooling_enabled"] = *v == "on";
  }
  return merge_config(cfg, overrides);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "Config JSON file")->check(CLI::ExistingFile);
  app->add_option("--store", c.store, "Run store root (env DTWIN_STORE, default ./dtwin-store)");
  app->add_option("--policy", c.policy, "fcfs | sjf | replay (env DTWIN_POLICY)");
  app->add_option("--loss-mode", c.loss_mode, "ac_baseline | smart_staging | dc_380v (env DTWIN_LOSS_MODE)");
  app->add_option("--seed", c.seed, "RNG seed (env DTWIN_SEED)");
  app->add_option("--cooling", c.cooling, "on | off (env DTWIN_COOLING)");
  app->add_option("-d,--duration", c.duration_s, "Simulated seconds")->check(CLI::NonNegativeNumber);
  app->add_option("--wetbulb-csv", c.wetbulb_csv, "time_s,wetbulb_c series")->check(CLI::ExistingFile);
  app->add_option("-o,--out", c.out_dir, "Write series here instead of the run store");
  app->add_option("--label", c.label, "Run label");
  app->add_flag("--serial", c.serial, "Serial power kernel");
  app->add_flag("-q,--quiet", c.quiet, "Only print the report");
}

void print_report(const json& report, std::ostream& os) {
  for (auto it = report.begin(); it != report.end(); ++it) {
    char line[128];
    if (it->is_number_integer() || it->is_number_unsigned()) {
      std::snprintf(line, sizeof line, "  %-26s %lld\n", it.key().c_str(), it->get<long long>());
    } else if (it->is_number()) {
      std::snprintf(line, sizeof line, "  %-26s %.6g\n", it.key().c_str(), it->get<double>());
    } else {
      continue;
    }
    os << line;
  }
}

json build_request(const Common& c, json workload) {
  json req = {{"duration_s", c.duration_s}, {"workload", std::move(workload)}, {"label", c.label}};
  if (c.serial) req["exec"] = "serial";
  if (!c.wetbulb_csv.empty()) {
    TimeSeries wb = read_wetbulb_csv(c.wetbulb_csv);
    req["wetbulb"] = {{"time_s", wb.time_s}, {"wetbulb_c", wb.value}};
  }
  return req;
}

int execute(const Common& c, json workload) {
  const SystemConfig cfg = resolve_config(c);
  const json req = build_request(c, std::move(workload));

  if (!c.out_dir.empty()) {
    Scenario sc = build_scenario(req, cfg);
    EngineHooks hooks;
    int last = -1;
    if (!c.quiet) {
      hooks.on_progress = [&](double f) {
        const int pct = static_cast<int>(f * 100.0);
        if (pct / 10 != last / 10) std::cerr << "\r  " << pct << "%" << std::flush;
        last = pct;
      };
    }
    RunResult r = run_simulation(sc.config, sc.jobs, sc.options, hooks);
    if (!c.quiet) std::cerr << "\r";
    export_run(r, c.out_dir);
    write_file_atomic(fs::path(c.out_dir) / "config.json", config_to_json(sc.config).dump(2) + "\n");
    if (sc.ingest) write_file_atomic(fs::path(c.out_dir) / "ingest.json", sc.ingest->to_json().dump(2) + "\n");
    for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
    if (!c.quiet) std::cout << "wrote " << c.out_dir << " in " << r.wall_clock_s << " s\n";
    print_report(report_to_json(make_report(r)), std::cout);
    return 0;
  }

  RunStore store(store_root(c));
  Service svc(store, {1, cfg});
  RunDescriptor d = svc.submit(req);
  if (!c.quiet) std::cerr << "run " << d.run_id << "\n";
  while (true) {
    d = svc.wait(d.run_id, std::chrono::milliseconds(500));
    if (d.status == RunStatus::Done || d.status == RunStatus::Failed) break;
    if (!c.quiet) std::cerr << "\r  " << static_cast<int>(d.progress * 100.0) << "%" << std::flush;
  }
  if (!c.quiet) std::cerr << "\r";
  if (d.status == RunStatus::Failed) {
    std::cerr << "run " << d.run_id << " failed: " << d.error << "\n";
    return 1;
  }
  const fs::path dir = store.run_dir(d.run_id);
  for (const auto& w : json::parse(read_file(dir / "warnings.json"))) std::cerr << "warning: " << w.get<std::string>() << "\n";
  std::cout << d.run_id << "\n";
  print_report(json::parse(svc.report_text(d.run_id)), std::cout);
  return 0;
}

// A run reference is either a directory holding report.json or an id in the store.
fs::path locate_run(const std::string& ref, const Common& c) {
  if (fs::exists(fs::path(ref) / "report.json")) return ref;
  RunStore store(store_root(c));
  std::optional<RunDescriptor> d = store.get(ref);
  if (!d) throw std::runtime_error("no run directory or stored run named " + ref);
  if (d->status != RunStatus::Done) throw std::runtime_error("run " + ref + " is " + to_string(d->status));
  return store.run_dir(ref);
}

json load_report(const std::string& ref, const Common& c) {
  return json::parse(read_file(locate_run(ref, c) / "report.json"));
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power and cooling digital twin for a liquid-cooled supercomputer"};
  app.require_subcommand(1);
  Common c;

  auto* run = app.add_subcommand("run", "Run a synthetic (or idle) workload synchronously");
  add_common(run, c);
  std::string stats_path;
  bool idle = false;
  run->add_option("--stats", stats_path, "Workload statistics JSON")->check(CLI::ExistingFile);
  run->add_flag("--idle", idle, "No jobs");

  auto* replay = app.add_subcommand("replay", "Replay a telemetry trace");
  add_common(replay, c);
  std::string trace_path;
  replay->add_option("--trace", trace_path, "Trace JSON")->required()->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "Print the report of a stored run or output directory");
  add_common(report, c);
  std::string report_ref;
  bool as_json = false;
  report->add_option("run", report_ref, "Run id or directory")->required();
  report->add_flag("--json", as_json, "Raw JSON");

  auto* compare = app.add_subcommand("compare", "Compare two runs, or a run against measured power");
  add_common(compare, c);
  std::string ref_a, ref_b, measured;
  compare->add_option("a", ref_a, "Baseline run id or directory")->required();
  compare->add_option("b", ref_b, "Scenario run id or directory");
  compare->add_option("--measured", measured, "time_s,power_w CSV to score run a against")->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  add_common(serve, c);
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string static_dir;
  int workers = 2;
  serve->add_option("-p,--port", port, "Port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--static", static_dir, "Dashboard build to serve at /");
  serve->add_option("--workers", workers, "Concurrent runs")->check(CLI::PositiveNumber);

  auto* ensemble = app.add_subcommand("ensemble", "Synthetic runs over several seeds with min/avg/max/std");
  add_common(ensemble, c);
  int n_seeds = 4;
  ensemble->add_option("-n,--seeds", n_seeds, "Number of seeds (>= 2)")->check(CLI::Range(2, 100000));
  ensemble->add_option("--stats", stats_path, "Workload statistics JSON")->check(CLI::ExistingFile);

  auto* cosim = app.add_subcommand("cosim", "Step the cooling model from a CSV of inputs");
  add_common(cosim, c);
  std::string cosim_in, cosim_out;
  double warmup_s = 1800.0;
  cosim->add_option("--input", cosim_in, "time_s,wetbulb_temperature,rack_power_00..")->required()->check(
      CLI::ExistingFile);
  cosim->add_option("--output", cosim_out, "Cooling outputs CSV")->required();
  cosim->add_option("--warmup", warmup_s, "Warm-up seconds at the first record")->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (idle) return execute(c, {{"kind", "idle"}});
      json w = {{"kind", "synthetic"}};
      if (!stats_path.empty()) w["stats"] = json::parse(read_file(stats_path));
      return execute(c, w);
    }
    if (*replay) {
      return execute(c, {{"kind", "trace"}, {"trace_path", fs::absolute(trace_path).string()}});
    }
    if (*report) {
      json rep = load_report(report_ref, c);
      if (as_json) {
        std::cout << rep.dump(2) << "\n";
      } else {
        print_report(rep, std::cout);
      }
      return 0;
    }
    if (*compare) {
      if (!measured.empty()) {
        const fs::path dir = locate_run(ref_a, c);
        CsvTable power = read_csv(dir / "power.csv");
        ErrorMetrics m = compare_series(metric_series_from_csv(power, "p_system_w"), read_measured_power_csv(measured));
        std::cout << json{{"rmse_w", m.rmse}, {"mae_w", m.mae}, {"samples", m.samples}}.dump(2) << "\n";
        return 0;
      }
      if (ref_b.empty()) throw std::runtime_error("compare needs two runs or --measured");
      json fields = compare_reports(load_report(ref_a, c), load_report(ref_b, c));
      std::printf("  %-26s %14s %14s %14s %9s\n", "field", "a", "b", "b-a", "pct");
      for (auto it = fields.begin(); it != fields.end(); ++it) {
        const json& f = *it;
        std::printf("  %-26s %14.6g %14.6g %14.6g %9s\n", it.key().c_str(), f["a"].get<double>(),
                    f["b"].get<double>(), f["delta"].get<double>(),
                    f["pct"].is_null() ? "-" : (std::to_string(f["pct"].get<double>()).substr(0, 7) + "%").c_str());
      }
      return 0;
    }
    if (*serve) {
      RunStore store(store_root(c));
      Service svc(store, {workers, resolve_config(c)});
      auto srv = make_http_server(svc, static_dir);
      g_server = srv.get();
      std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
      std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
      if (port == 0) {
        port = srv->bind_to_any_port(host);
      } else if (!srv->bind_to_port(host, port)) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 1;
      }
      std::cout << "listening on http://" << host << ":" << port << "  store " << store.root() << std::endl;
      srv->listen_after_bind();
      svc.shutdown();
      return 0;
    }
    if (*ensemble) {
      SystemConfig cfg = resolve_config(c);
      WorkloadStats stats = stats_path.empty() ? WorkloadStats{} : stats_from_json(json::parse(read_file(stats_path)));
      EnsembleTable t = run_ensemble(cfg, stats, n_seeds, c.duration_s);
      if (!c.out_dir.empty()) write_file_atomic(fs::path(c.out_dir) / "ensemble.json", t.to_json().dump(2) + "\n");
      std::printf("  %-26s %14s %14s %14s %14s\n", "field", "min", "avg", "max", "std");
      for (const auto& [name, s] : t.fields) {
        std::printf("  %-26s %14.6g %14.6g %14.6g %14.6g\n", name.c_str(), s.min, s.avg, s.max, s.std);
      }
      return 0;
    }
    if (*cosim) {
      SystemConfig cfg = resolve_config(c);
      CoolingModel model(cfg);
      auto records = read_cosim_inputs(cosim_in, cfg.topology.num_cdus);
      write_file_atomic(cosim_out, run_cosim(model, cfg.topology, records, warmup_s));
      if (!c.quiet) std::cout << "wrote " << records.size() << " steps to " << cosim_out << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ServiceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
