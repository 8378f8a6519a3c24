#include "dtwin/power_kernels.hpp"

#include <algorithm>

namespace dtwin {

PowerModel::PowerModel(const SystemConfig& config)
    : config_(config),
      nodes_(config.topology.nodes_total),
      racks_(config.topology.rack_capacity()),
      nodes_per_rack_(config.topology.nodes_per_rack),
      nodes_per_chassis_(config.topology.nodes_per_chassis()),
      chassis_per_rack_(config.topology.chassis_per_rack),
      rectifiers_per_chassis_(config.topology.rectifiers_per_chassis()),
      chassis_switch_w_(config.topology.switches_per_chassis() * config.power.switch_avg_w) {}

void PowerModel::node_powers(const double* cpu, const double* gpu, double* out, Exec exec) const {
  const ComponentPowerTable& t = config_.power;
  const int n = nodes_;
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) out[i] = node_power(cpu[i], gpu[i], t);
  } else {
    for (int i = 0; i < n; ++i) out[i] = node_power(cpu[i], gpu[i], t);
  }
}

RackPower PowerModel::rack_body(int rack, const double* node_power_w) const {
  RackPower rp;
  const int first = rack * nodes_per_rack_;
  if (first >= nodes_) return rp;  // unpopulated rack: no nodes, no switches
  const LossModelParams& loss = config_.loss_model;
  const bool switches_inside = loss.switches_behind_rectifiers;
  for (int c = 0; c < chassis_per_rack_; ++c) {
    const int begin = first + c * nodes_per_chassis_;
    const int end = std::min(begin + nodes_per_chassis_, nodes_);
    double p_out = 0.0;
    for (int i = begin; i < end; ++i) p_out += node_power_w[i];
    if (switches_inside) p_out += chassis_switch_w_;
    const double dc_load = p_out / loss.sivoc_eff_nominal;
    const Conversion conv = conversion(p_out, dc_load, loss, rectifiers_per_chassis_);
    rp.p_out_w += p_out;
    rp.p_in_w += conv.p_in_w;
    rp.loss_rectifier_w += conv.loss_rectifier_w;
    rp.loss_sivoc_w += conv.loss_sivoc_w;
    if (conv.saturated) ++rp.saturated_chassis;
  }
  if (!switches_inside) {
    const double sw = chassis_per_rack_ * chassis_switch_w_;
    rp.p_out_w += sw;
    rp.p_in_w += sw;
  }
  return rp;
}

void PowerModel::rack_powers(const double* node_power_w, RackPower* out, Exec exec) const {
  const int n = racks_;
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < n; ++r) out[r] = rack_body(r, node_power_w);
  } else {
    for (int r = 0; r < n; ++r) out[r] = rack_body(r, node_power_w);
  }
}

PowerSample PowerModel::evaluate(const std::vector<double>& cpu, const std::vector<double>& gpu, Exec exec,
                                 bool keep_node_powers) const {
  std::vector<double> p_node(static_cast<std::size_t>(nodes_));
  std::vector<RackPower> racks(static_cast<std::size_t>(racks_));
  node_powers(cpu.data(), gpu.data(), p_node.data(), exec);
  rack_powers(p_node.data(), racks.data(), exec);
  PowerSample s = system_power(racks, config_);
  if (keep_node_powers) s.p_node_w = std::move(p_node);
  return s;
}

}  // namespace dtwin
