#include "dtwin/power.hpp"

#include <algorithm>
#include <numeric>

namespace dtwin {

double node_power(double cpu_util, double gpu_util, const ComponentPowerTable& t) {
  return t.cpus_per_node * lerp_power(cpu_util, t.cpu_idle_w, t.cpu_max_w) +
         t.gpus_per_node * lerp_power(gpu_util, t.gpu_idle_w, t.gpu_max_w) + t.nics_per_node * t.nic_unit_w +
         t.ram_avg_w + t.nvme_per_node * t.nvme_unit_w;
}

double rectifier_efficiency(const LossModelParams& params, double load_w) {
  const auto& curve = params.rectifier_eff_curve;
  if (curve.empty()) return params.rectifier_eff_nominal;
  if (load_w <= curve.front().load_w) return curve.front().efficiency;
  if (load_w >= curve.back().load_w) return curve.back().efficiency;
  auto hi = std::upper_bound(curve.begin(), curve.end(), load_w,
                             [](double x, const CurvePoint& p) { return x < p.load_w; });
  auto lo = hi - 1;
  const double f = (load_w - lo->load_w) / (hi->load_w - lo->load_w);
  return lo->efficiency + f * (hi->efficiency - lo->efficiency);
}

RectifierStaging stage_rectifiers(const LossModelParams& params, double chassis_load_w, int rectifiers) {
  RectifierStaging s;
  s.active = rectifiers;
  s.saturated = chassis_load_w > rectifiers * params.rectifier_rated_w;
  s.efficiency = rectifier_efficiency(params, chassis_load_w / rectifiers);
  if (params.mode != LossMode::SmartStaging || s.saturated) return s;
  // Walk down from the full set so ties keep more rectifiers online.
  for (int n = rectifiers - 1; n >= 1; --n) {
    if (n * params.rectifier_rated_w < chassis_load_w) break;
    const double eta = rectifier_efficiency(params, chassis_load_w / n);
    if (eta > s.efficiency) {
      s.efficiency = eta;
      s.active = n;
    }
  }
  return s;
}

Conversion conversion(double p_out_w, double chassis_load_w, const LossModelParams& params, int rectifiers) {
  Conversion c;
  c.p_out_w = p_out_w;
  if (params.mode == LossMode::Dc380V) {
    c.eta = params.dc_mode_efficiency;
    c.eta_rectifier = 1.0;
    c.active_rectifiers = 0;
    c.p_in_w = p_out_w / c.eta;
    c.loss_w = c.p_in_w - p_out_w;
    c.loss_sivoc_w = c.loss_w;
    return c;
  }
  const RectifierStaging staging = stage_rectifiers(params, chassis_load_w, rectifiers);
  c.active_rectifiers = staging.active;
  c.saturated = staging.saturated;
  c.eta_rectifier = staging.efficiency;
  c.eta = staging.efficiency * params.sivoc_eff_nominal;
  c.p_in_w = p_out_w / c.eta;
  c.loss_w = c.p_in_w - p_out_w;
  const double rectifier_dc_w = p_out_w / params.sivoc_eff_nominal;
  c.loss_sivoc_w = rectifier_dc_w - p_out_w;
  c.loss_rectifier_w = c.p_in_w - rectifier_dc_w;
  return c;
}

double rack_power(const std::vector<double>& node_powers_in_w, const ComponentPowerTable& table,
                  int switches_per_rack) {
  return std::accumulate(node_powers_in_w.begin(), node_powers_in_w.end(), 0.0) +
         switches_per_rack * table.switch_avg_w;
}

PowerSample system_power(const std::vector<RackPower>& racks, const SystemConfig& config) {
  const Topology& topo = config.topology;
  PowerSample s;
  s.p_rack_w.assign(static_cast<std::size_t>(topo.rack_capacity()), 0.0);
  s.p_cdu_group_w.assign(static_cast<std::size_t>(topo.num_cdus), 0.0);
  const std::size_t n = std::min(racks.size(), s.p_rack_w.size());
  for (std::size_t r = 0; r < n; ++r) {
    const RackPower& rp = racks[r];
    s.p_rack_w[r] = rp.p_in_w;
    s.p_cdu_group_w[r / static_cast<std::size_t>(topo.racks_per_cdu)] += rp.p_in_w;
    s.p_it_out_w += rp.p_out_w;
    s.loss_rectifier_w += rp.loss_rectifier_w;
    s.loss_sivoc_w += rp.loss_sivoc_w;
    s.saturated_chassis += rp.saturated_chassis;
  }
  double groups = 0.0;
  for (double g : s.p_cdu_group_w) groups += g;
  s.p_system_w = groups + topo.num_cdus * config.power.cdu_pump_w;
  s.loss_total_w = s.loss_rectifier_w + s.loss_sivoc_w;
  const double p_in = s.p_it_out_w + s.loss_total_w;
  s.eta_system = p_in > 0.0 ? s.p_it_out_w / p_in : 1.0;
  return s;
}

}  // namespace dtwin
