#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtwin/config.hpp"

namespace dtwin {

class CoolingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kGpmPerM3s = 15850.323;

/// H = rho * Q * dT * c
double heat_extracted(double rho_kg_m3, double flow_m3_s, double delta_t_c, double c_j_kg_c);

/// One explicit Euler update of a mixed volume: T + net_heat * dt / C.
inline double advance_volume(double temp_c, double capacitance_j_c, double net_heat_w, double dt_s) {
  return temp_c + net_heat_w * dt_s / capacitance_j_c;
}

/// Counterflow heat-exchanger effectiveness from NTU and capacity ratio.
double counterflow_effectiveness(double ua_w_c, double c_hot_w_c, double c_cold_w_c);

struct AuxPower {
  double cdu_pumps_w = 0.0;
  double htwp_w = 0.0;
  double ctwp_w = 0.0;
  double ct_fans_w = 0.0;
  double total() const { return cdu_pumps_w + htwp_w + ctwp_w + ct_fans_w; }
};

/// (p_system + aux) / p_system. Throws on non-positive system power.
double compute_pue(double p_system_w, double aux_w);
inline double compute_pue(double p_system_w, const AuxPower& aux) { return compute_pue(p_system_w, aux.total()); }

/// Positional PID with clamped output and conditional integration.
/// direction = +1: output rises when the measurement is above setpoint.
struct PidController {
  PidGains gains;
  double out_min = 0.0;
  double out_max = 1.0;
  int direction = 1;
  double integral = 0.0;
  double prev_error = 0.0;
  bool primed = false;
  double output = 0.0;

  double update(double setpoint, double measurement, double dt_s);
  /// Makes the next update continue smoothly from `value`.
  void hold_at(double value);

  bool operator==(const PidController&) const = default;
};

struct CoolingInputs {
  std::vector<double> cdu_heat_w;
  double wetbulb_c = 15.0;
  /// IT power used as the PUE denominator. Estimated from heat when absent.
  std::optional<double> system_power_w;
};

void validate(const CoolingInputs& inputs, int num_cdus);

struct CduState {
  double t_return_c = 0.0;     // secondary return (rack outlet)
  double t_supply_c = 0.0;     // secondary supply (HX outlet)
  double t_primary_c = 0.0;    // primary return (HX cold outlet)
  double pump_speed = 0.0;
  double valve = 0.0;
  PidController pump_pid;
  PidController valve_pid;

  bool operator==(const CduState&) const = default;
};

struct LoopState {
  std::vector<CduState> cdus;
  double t_htw_return_c = 0.0;
  double t_htw_supply_c = 0.0;
  double t_ctw_return_c = 0.0;  // tower inlet
  double t_ctw_supply_c = 0.0;  // basin, EHX cold inlet
  double htwp_speed = 0.0;
  double ctwp_speed = 0.0;
  double fan_speed = 0.0;
  double htws_delayed_c = 0.0;
  PidController htwp_pid;
  PidController ctwp_pid;
  PidController fan_pid;

  bool operator==(const LoopState&) const = default;
};

struct StageTimer {
  double up_s = 0.0;
  double down_s = 0.0;
  double since_change_s = std::numeric_limits<double>::infinity();
  bool operator==(const StageTimer&) const = default;
};

struct StagingState {
  int n_ct = 1;
  int n_ehx = 1;
  int n_htwp = 1;
  int n_ctwp = 1;
  StageTimer htwp;
  StageTimer ctwp;
  StageTimer ct;
  bool operator==(const StagingState&) const = default;
};

struct CoolingState {
  LoopState loop;
  StagingState staging;
  double time_s = 0.0;
  bool operator==(const CoolingState&) const = default;
};

/// Flows and pressures implied by the current actuator positions.
struct Hydraulics {
  std::vector<double> cdu_secondary_m3_s;
  std::vector<double> cdu_primary_m3_s;
  std::vector<double> cdu_secondary_dp_kpa;
  double htw_m3_s = 0.0;
  double htw_pump_dp_kpa = 0.0;
  double htw_header_dp_kpa = 0.0;
  double ctw_m3_s = 0.0;
  double ct_header_kpa = 0.0;
};

Hydraulics solve_hydraulics(const CoolingState& state, const CoolingParams& params);

/// Pump dp: shutoff * s^2 - k * (Q / n)^2, with k from the rated point.
double pump_head_kpa(const PumpBankParams& pump, double speed, double flow_per_pump_m3_s);
double htw_header_dp_kpa(const CoolingParams& params, int pumps, double speed, double flow_m3_s);
double ct_header_pressure_kpa(const CoolingParams& params, int cells, double flow_m3_s);

/// Pump staging (HTWP and CTWP banks) and the EHX count that follows n_ct.
StagingState stage_pumps(const CoolingState& state, const CoolingParams& params, double dt_s);
/// Tower cell staging from header pressure, fan speed and delayed HTWS gradient.
StagingState stage_towers(const CoolingState& state, const CoolingParams& params, double dt_s);

int ehx_for_cells(int n_ct, const CoolingParams& params);
/// delayed-HTWS slope in degC/min
double htws_gradient_c_per_min(const LoopState& loop, const CoolingParams& params);

struct CduOutputs {
  double pump_work_w = 0.0;
  double primary_flow_gpm = 0.0;
  double secondary_flow_gpm = 0.0;
  double primary_supply_c = 0.0;
  double primary_return_c = 0.0;
  double secondary_supply_c = 0.0;
  double secondary_return_c = 0.0;
  double primary_supply_kpa = 0.0;
  double primary_return_kpa = 0.0;
  double secondary_supply_kpa = 0.0;
  double secondary_return_kpa = 0.0;
};

struct CoolingOutputs {
  double time_s = 0.0;
  std::vector<CduOutputs> cdus;
  double htw_flow_gpm = 0.0;
  double ctw_flow_gpm = 0.0;
  double htw_supply_c = 0.0;
  double htw_return_c = 0.0;
  double htw_supply_kpa = 0.0;
  double htw_return_kpa = 0.0;
  int n_htwp = 0;
  int n_ehx = 0;
  std::vector<double> htwp_power_w;
  std::vector<double> htwp_speed;
  int n_ct = 0;
  std::vector<double> ctwp_power_w;
  std::vector<double> fan_power_w;
  double pue = 1.0;

  // diagnostics, not part of the flat schema
  double heat_in_w = 0.0;
  double heat_rejected_w = 0.0;
  double ctw_supply_c = 0.0;
  double ctw_return_c = 0.0;
  double ct_header_kpa = 0.0;
  double wetbulb_c = 0.0;
  int n_ctwp = 0;
  double system_power_w = 0.0;
  AuxPower aux;
};

std::vector<std::string> cooling_output_names(const Topology& topology, const CoolingParams& params);
std::vector<double> flatten(const CoolingOutputs& outputs);

struct CoolingStep {
  CoolingState state;
  CoolingOutputs outputs;
};

class CoolingModel {
 public:
  CoolingModel(const Topology& topology, const CoolingParams& params, const ComponentPowerTable& power,
               double cooling_efficiency = 0.945);
  explicit CoolingModel(const SystemConfig& config)
      : CoolingModel(config.topology, config.cooling, config.power, config.simulation.cooling_efficiency) {}

  /// Algebraic warm start near the steady state for `inputs`.
  CoolingState initial_state(const CoolingInputs& inputs) const;

  /// Advances `dt_s` seconds in substeps. Pure: same inputs, same result.
  CoolingStep step(const CoolingState& state, const CoolingInputs& inputs, double dt_s) const;

  /// initial_state followed by `seconds` of stepping at constant inputs.
  CoolingStep warmup(const CoolingInputs& inputs, double seconds, double dt_s = 15.0) const;

  CoolingOutputs outputs(const CoolingState& state, const CoolingInputs& inputs) const;
  AuxPower aux_power(const CoolingState& state) const;

  const CoolingParams& params() const { return params_; }
  int num_cdus() const { return topology_.num_cdus; }

 private:
  void substep(CoolingState& s, const CoolingInputs& in, double h) const;

  Topology topology_;
  CoolingParams params_;
  ComponentPowerTable power_;
  double cooling_efficiency_;
  double rho_c_;  // volumetric heat capacity J/(m3 degC)
};

}  // namespace dtwin
