#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtwin/config.hpp"
#include "dtwin/engine.hpp"
#include "dtwin/workload.hpp"

namespace dtwin {

enum class WorkloadKind { Idle, Synthetic, Trace, Jobs };
std::string to_string(WorkloadKind kind);

/// Everything needed to start one run. Built from a request document shared
/// by POST /runs and the CLI:
///
///   { "label": "...", "duration_s": 3600,
///     "config": { partial config, same schema as the config file },
///     "workload": { "kind": "synthetic", "stats": {...} }
///               | { "kind": "trace", "trace": {...} } | { "kind": "trace", "trace_path": "..." }
///               | { "kind": "jobs", "jobs": [...] } | { "kind": "idle" },
///     "wetbulb": { "time_s": [...], "wetbulb_c": [...] } }
struct Scenario {
  std::string label;
  SystemConfig config;
  WorkloadKind kind = WorkloadKind::Idle;
  std::vector<Job> jobs;
  RunOptions options;
  std::optional<WorkloadStats> stats;
  std::optional<IngestReport> ingest;
};

/// Throws ConfigError (field path in the message) for schema violations,
/// WorkloadError for bad traces.
Scenario build_scenario(const nlohmann::json& request, const SystemConfig& base = {});

/// Applies a partial config document on top of `base`, rejecting unknown keys.
SystemConfig merge_config(const SystemConfig& base, const nlohmann::json& partial);

/// Picks the first set value: command-line flag, then environment, then file.
std::optional<std::string> resolve_setting(const std::optional<std::string>& flag, const char* env_var,
                                           const std::optional<std::string>& file_value);

}  // namespace dtwin
