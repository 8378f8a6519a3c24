#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dtwin {

/// Raised when a config document cannot be parsed or violates an invariant.
/// `field()` is the dotted path of the offending entry, e.g.
/// "loss_model.rectifier_eff_nominal".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Frontier layout: 25 CDUs x 3 racks, 128 nodes per rack, 9472 populated nodes.
struct Topology {
  int num_cdus = 25;
  int racks_per_cdu = 3;
  int chassis_per_rack = 8;
  int rectifiers_per_rack = 32;
  int blades_per_rack = 64;
  int nodes_per_rack = 128;
  int sivocs_per_rack = 128;
  int switches_per_rack = 32;
  int nodes_total = 9472;

  int nodes_per_chassis() const { return nodes_per_rack / chassis_per_rack; }
  int rectifiers_per_chassis() const { return rectifiers_per_rack / chassis_per_rack; }
  int switches_per_chassis() const { return switches_per_rack / chassis_per_rack; }
  /// Racks that hold at least one populated node.
  int populated_racks() const { return (nodes_total + nodes_per_rack - 1) / nodes_per_rack; }
  int rack_capacity() const { return num_cdus * racks_per_cdu; }

  bool operator==(const Topology&) const = default;
};

struct ComponentPowerTable {
  double cpu_idle_w = 90.0;
  double cpu_max_w = 280.0;
  double gpu_idle_w = 88.0;
  double gpu_max_w = 560.0;
  double ram_avg_w = 74.0;
  double nvme_unit_w = 15.0;
  double nic_unit_w = 20.0;
  double switch_avg_w = 250.0;
  double cdu_pump_w = 8700.0;
  int cpus_per_node = 1;
  int gpus_per_node = 4;
  int nics_per_node = 4;
  int nvme_per_node = 2;

  bool operator==(const ComponentPowerTable&) const = default;
};

enum class LossMode { AcBaseline, SmartStaging, Dc380V };

std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& text);

struct CurvePoint {
  double load_w = 0.0;
  double efficiency = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct LossModelParams {
  LossMode mode = LossMode::AcBaseline;
  double rectifier_eff_nominal = 0.96;
  double sivoc_eff_nominal = 0.972;
  /// Load per active rectifier (W, DC side) -> efficiency. Empty means the
  /// nominal constant is used at every load.
  std::vector<CurvePoint> rectifier_eff_curve = {
      {2500.0, 0.945}, {7500.0, 0.963}, {10000.0, 0.960}};
  double rectifier_rated_w = 10000.0;
  double dc_mode_efficiency = 0.973;
  /// Switch power rides the rectified rack bus and pays conversion losses.
  bool switches_behind_rectifiers = true;

  bool operator==(const LossModelParams&) const = default;
};

struct EconomicsParams {
  double emission_intensity_lbs_per_mwh = 852.3;
  double lbs_per_metric_ton = 2204.6;
  double electricity_usd_per_kwh = 0.090;

  bool operator==(const EconomicsParams&) const = default;
};

enum class SchedulingPolicy { Fcfs, Sjf, Replay };

std::string to_string(SchedulingPolicy policy);
SchedulingPolicy parse_policy(const std::string& text);

struct SimulationParams {
  double tick_s = 1.0;
  double trace_quanta_s = 15.0;
  int cooling_stride_ticks = 15;
  SchedulingPolicy policy = SchedulingPolicy::Fcfs;
  std::uint64_t seed = 0;
  double cooling_efficiency = 0.945;
  bool cooling_enabled = false;
  double wetbulb_c = 15.0;
  double cooling_warmup_s = 1800.0;

  bool operator==(const SimulationParams&) const = default;
};

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  bool operator==(const PidGains&) const = default;
};

struct PumpBankParams {
  int count = 4;
  double rated_power_w = 0.0;
  double shutoff_head_kpa = 0.0;
  double rated_head_kpa = 0.0;
  double rated_flow_m3_s = 0.0;
  double min_speed = 0.0;
  double stage_up_speed = 0.90;
  double stage_down_speed = 0.50;
  bool operator==(const PumpBankParams&) const = default;
};

/// Lumped-parameter plant description. Volumes set the thermal capacitance of
/// each mixed node; conductances are UA values in W/degC.
struct CoolingParams {
  double water_density_kg_m3 = 997.0;
  double water_cp_j_kg_c = 4186.0;
  double substep_s = 1.0;
  double max_substep_delta_c = 1.0;

  // CDU-rack loops
  double cdu_rack_volume_m3 = 0.6;
  double cdu_supply_volume_m3 = 0.4;
  double cdu_primary_volume_m3 = 0.2;
  double cdu_secondary_rated_flow_m3_s = 0.035;
  double cdu_secondary_rated_dp_kpa = 150.0;
  double cdu_secondary_dp_setpoint_kpa = 100.0;
  double cdu_secondary_base_pressure_kpa = 150.0;
  double cdu_primary_max_flow_m3_s = 0.019;
  double cdu_valve_min_opening = 0.05;
  double cdu_valve_dp_kpa = 40.0;
  double cdu_hx_ua_w_c = 250e3;
  double cdu_supply_setpoint_c = 32.0;
  PidGains cdu_pump_pid = {0.002, 0.002, 0.0};
  PidGains cdu_valve_pid = {0.08, 0.004, 0.0};

  // primary (HTW) loop
  double htw_supply_volume_m3 = 30.0;
  double htw_return_volume_m3 = 30.0;
  double htw_bypass_flow_m3_s = 0.02;
  double htw_pipe_k_kpa_per_m3s2 = 80.0;
  double htw_header_dp_setpoint_kpa = 50.0;
  double htw_static_pressure_kpa = 200.0;
  PumpBankParams htwp = {4, 75e3, 400.0, 250.0, 0.15, 0.40, 0.90, 0.50};
  PidGains htwp_pid = {0.0005, 0.0005, 0.0};

  // intermediate heat exchangers
  int ehx_count = 5;
  double ehx_ua_per_unit_w_c = 1.2e6;

  // cooling tower loop
  int ct_cells = 20;
  int ct_cells_per_tower = 4;
  double ctw_return_volume_m3 = 20.0;
  double ctw_basin_volume_m3 = 100.0;
  double ct_cell_ua_w_c = 175e3;
  double ct_fan_exponent = 0.8;
  double ct_natural_draft_fraction = 0.1;
  double ct_fan_rated_power_w = 30e3;
  double ct_fan_min_speed = 0.2;
  double ct_fan_stage_up_speed = 0.95;
  double ct_fan_stage_down_speed = 0.22;
  double ct_header_static_kpa = 20.0;
  double ct_header_k_kpa_per_m3s2 = 29744.0;
  double ct_header_pressure_setpoint_kpa = 70.0;
  double ct_header_pressure_low_kpa = 50.0;
  double ct_header_pressure_high_kpa = 90.0;
  double ctw_loop_k_kpa_per_m3s2 = 60.0;
  PumpBankParams ctwp = {4, 60e3, 250.0, 150.0, 0.25, 0.55, 0.95, 0.60};
  PidGains ctwp_pid = {0.002, 0.002, 0.0};
  double htws_setpoint_c = 27.0;
  PidGains fan_pid = {0.05, 0.0001, 0.0};
  double htws_gradient_threshold_c_per_min = 0.1;
  double htws_delay_tau_s = 300.0;
  double staging_hold_s = 300.0;

  bool operator==(const CoolingParams&) const = default;
};

struct SystemConfig {
  Topology topology;
  ComponentPowerTable power;
  LossModelParams loss_model;
  EconomicsParams economics;
  SimulationParams simulation;
  CoolingParams cooling;

  bool operator==(const SystemConfig&) const = default;
};

/// Location of a node in the power/cooling hierarchy. `rack` is the global
/// rack index; `chassis` and `blade` are positions within that rack.
struct NodeLocation {
  int cdu = 0;
  int rack = 0;
  int chassis = 0;
  int blade = 0;
  bool operator==(const NodeLocation&) const = default;
};

/// Dense row-major mapping of node ids onto the topology. Throws
/// std::out_of_range for ids outside [0, nodes_total).
NodeLocation map_node(const Topology& topology, int node_id);

SystemConfig load_config(const std::filesystem::path& path);
SystemConfig config_from_json(const nlohmann::json& document);
nlohmann::json config_to_json(const SystemConfig& config);

/// Throws ConfigError naming the first violated invariant.
void validate(const SystemConfig& config);

}  // namespace dtwin
