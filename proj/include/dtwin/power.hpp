#pragma once

#include <vector>

#include "dtwin/config.hpp"

namespace dtwin {

/// idle + util * (max - idle)
inline double lerp_power(double util, double idle_w, double max_w) { return idle_w + util * (max_w - idle_w); }

/// Output-side node power: CPUs, GPUs, NICs, RAM and NVMe.
double node_power(double cpu_util, double gpu_util, const ComponentPowerTable& table);

/// Efficiency of one rectifier at a DC load; clamps outside the curve, and
/// falls back to the nominal value when no curve is configured.
double rectifier_efficiency(const LossModelParams& params, double load_per_rectifier_w);

struct RectifierStaging {
  int active = 4;
  double efficiency = 0.0;
  bool saturated = false;
};

/// Number of active rectifiers for a chassis DC load under the configured mode.
RectifierStaging stage_rectifiers(const LossModelParams& params, double chassis_load_w, int rectifiers = 4);

struct Conversion {
  double p_out_w = 0.0;
  double p_in_w = 0.0;
  double loss_w = 0.0;
  double loss_rectifier_w = 0.0;
  double loss_sivoc_w = 0.0;
  double eta = 1.0;
  double eta_rectifier = 1.0;
  int active_rectifiers = 0;
  bool saturated = false;
};

/// Converts an output-side power to AC input. `chassis_load_w` is the DC load
/// the chassis rectifiers carry.
Conversion conversion(double p_out_w, double chassis_load_w, const LossModelParams& params, int rectifiers = 4);

/// Sum of AC-side node powers plus the rack's switches.
double rack_power(const std::vector<double>& node_powers_in_w, const ComponentPowerTable& table,
                  int switches_per_rack = 32);

struct RackPower {
  double p_out_w = 0.0;
  double p_in_w = 0.0;
  double loss_rectifier_w = 0.0;
  double loss_sivoc_w = 0.0;
  int saturated_chassis = 0;
};

struct PowerSample {
  double time_s = 0.0;
  std::vector<double> p_node_w;
  std::vector<double> p_rack_w;
  std::vector<double> p_cdu_group_w;
  double p_system_w = 0.0;
  /// IT power after conversion, i.e. what the nodes and switches draw.
  double p_it_out_w = 0.0;
  double loss_rectifier_w = 0.0;
  double loss_sivoc_w = 0.0;
  double loss_total_w = 0.0;
  double eta_system = 1.0;
  int saturated_chassis = 0;
};

/// Groups racks by CDU and adds the CDU pumps. Racks past `racks.size()` are empty.
PowerSample system_power(const std::vector<RackPower>& racks, const SystemConfig& config);

/// Heat handed to the cooling model for one CDU group.
inline double cooling_feed(double p_cdu_group_w, double cooling_efficiency) {
  return cooling_efficiency * p_cdu_group_w;
}

}  // namespace dtwin
