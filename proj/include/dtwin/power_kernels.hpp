#pragma once

#include <vector>

#include "dtwin/config.hpp"
#include "dtwin/power.hpp"

namespace dtwin {

enum class Exec { Serial, Parallel };

/// Per-tick power evaluation over the whole machine. The serial and OpenMP
/// paths share the per-rack body and reduce racks in index order, so their
/// results are bitwise identical.
class PowerModel {
 public:
  explicit PowerModel(const SystemConfig& config);

  int nodes() const { return nodes_; }
  int racks() const { return racks_; }

  /// out[i] = node_power(cpu[i], gpu[i]) for every populated node.
  void node_powers(const double* cpu, const double* gpu, double* out, Exec exec) const;

  /// Applies conversion losses chassis by chassis and sums each rack.
  void rack_powers(const double* node_power_w, RackPower* out, Exec exec) const;

  /// node_powers + rack_powers + system_power.
  PowerSample evaluate(const std::vector<double>& cpu, const std::vector<double>& gpu, Exec exec,
                       bool keep_node_powers = false) const;

  const SystemConfig& config() const { return config_; }

 private:
  RackPower rack_body(int rack, const double* node_power_w) const;

  SystemConfig config_;
  int nodes_;
  int racks_;
  int nodes_per_rack_;
  int nodes_per_chassis_;
  int chassis_per_rack_;
  int rectifiers_per_chassis_;
  double chassis_switch_w_;
};

}  // namespace dtwin
