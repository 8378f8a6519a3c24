#include "dtwin/scenario.hpp"

#include <cstdlib>

namespace dtwin {

using nlohmann::json;

std::string to_string(WorkloadKind kind) {
  switch (kind) {
    case WorkloadKind::Idle: return "idle";
    case WorkloadKind::Synthetic: return "synthetic";
    case WorkloadKind::Trace: return "trace";
    case WorkloadKind::Jobs: return "jobs";
  }
  return "?";
}

SystemConfig merge_config(const SystemConfig& base, const json& partial) {
  if (partial.is_null()) return base;
  if (!partial.is_object()) throw ConfigError("config", "expected an object");
  json doc = config_to_json(base);
  doc.merge_patch(partial);
  try {
    return config_from_json(doc);
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    if (!e.field().empty() && msg.rfind(e.field() + ": ", 0) == 0) msg = msg.substr(e.field().size() + 2);
    throw ConfigError(e.field().empty() ? "config" : "config." + e.field(), msg);
  }
}

namespace {

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(where.empty() ? it.key() : where + "." + it.key(), "unknown field");
  }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where.empty() ? key : where + "." + key, "wrong type");
  }
}

}  // namespace

Scenario build_scenario(const json& request, const SystemConfig& base) {
  if (!request.is_object()) throw ConfigError("", "request must be a JSON object");
  only_keys(request, {"label", "config", "duration_s", "workload", "wetbulb", "exec"}, "");

  Scenario sc;
  sc.label = get_as<std::string>(request, "label", "", "");
  sc.config = merge_config(base, request.value("config", json()));
  sc.options.duration_s = get_as<double>(request, "duration_s", "", 3600.0);
  if (!(sc.options.duration_s >= 0.0) || sc.options.duration_s > 30.0 * 86400.0) {
    throw ConfigError("duration_s", "must be in [0, 30 days]");
  }
  const std::string exec = get_as<std::string>(request, "exec", "", "parallel");
  if (exec == "serial") {
    sc.options.exec = Exec::Serial;
  } else if (exec != "parallel") {
    throw ConfigError("exec", "expected 'serial' or 'parallel'");
  }

  if (request.contains("wetbulb")) {
    const json& wb = request.at("wetbulb");
    if (!wb.is_object()) throw ConfigError("wetbulb", "expected an object");
    only_keys(wb, {"time_s", "wetbulb_c"}, "wetbulb");
    sc.options.wetbulb.time_s = get_as<std::vector<double>>(wb, "time_s", "wetbulb", {});
    sc.options.wetbulb.value = get_as<std::vector<double>>(wb, "wetbulb_c", "wetbulb", {});
    if (sc.options.wetbulb.time_s.size() != sc.options.wetbulb.value.size()) {
      throw ConfigError("wetbulb", "time_s and wetbulb_c differ in length");
    }
    for (std::size_t i = 1; i < sc.options.wetbulb.time_s.size(); ++i) {
      if (!(sc.options.wetbulb.time_s[i] > sc.options.wetbulb.time_s[i - 1])) {
        throw ConfigError("wetbulb.time_s", "must be strictly increasing");
      }
    }
  }

  const json workload = request.value("workload", json{{"kind", "idle"}});
  if (!workload.is_object()) throw ConfigError("workload", "expected an object");
  const std::string kind = get_as<std::string>(workload, "kind", "workload", "idle");
  const SimulationParams& sim = sc.config.simulation;
  if (kind == "idle") {
    only_keys(workload, {"kind"}, "workload");
    sc.kind = WorkloadKind::Idle;
  } else if (kind == "synthetic") {
    only_keys(workload, {"kind", "stats"}, "workload");
    sc.kind = WorkloadKind::Synthetic;
    sc.stats = workload.contains("stats") ? stats_from_json(workload.at("stats")) : WorkloadStats{};
    sc.jobs = generate_synthetic(*sc.stats, sc.options.duration_s, sim.seed, sc.config.topology.nodes_total,
                                 sim.trace_quanta_s);
  } else if (kind == "trace") {
    only_keys(workload, {"kind", "trace", "trace_path"}, "workload");
    sc.kind = WorkloadKind::Trace;
    IngestReport rep;
    if (workload.contains("trace")) {
      sc.jobs = ingest_records(parse_json_trace(workload.at("trace")), sc.config.power, &rep);
    } else if (workload.contains("trace_path")) {
      sc.jobs = ingest_trace(get_as<std::string>(workload, "trace_path", "workload", ""), sc.config.power, &rep);
    } else {
      throw ConfigError("workload.trace", "trace workload needs 'trace' or 'trace_path'");
    }
    sc.ingest = rep;
  } else if (kind == "jobs") {
    only_keys(workload, {"kind", "jobs", "quanta_s"}, "workload");
    sc.kind = WorkloadKind::Jobs;
    sc.jobs = jobs_from_json(workload);
    sort_by_submit(sc.jobs);
  } else {
    throw ConfigError("workload.kind", "expected idle, synthetic, trace or jobs");
  }
  for (const Job& j : sc.jobs) validate_job(j);
  return sc;
}

std::optional<std::string> resolve_setting(const std::optional<std::string>& flag, const char* env_var,
                                           const std::optional<std::string>& file_value) {
  if (flag) return flag;
  if (env_var) {
    if (const char* v = std::getenv(env_var); v && *v) return std::string(v);
  }
  return file_value;
}

}  // namespace dtwin
