#include "dtwin/cooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dtwin {

namespace {

constexpr double kCduPumpMinSpeed = 0.2;

void check_finite(double v, const char* what, double time_s) {
  if (!std::isfinite(v)) {
    throw CoolingError(std::string("non-finite ") + what + " at t=" + std::to_string(time_s) + " s");
  }
}

}  // namespace

double heat_extracted(double rho, double flow, double delta_t, double c) { return rho * flow * delta_t * c; }

double counterflow_effectiveness(double ua, double c_hot, double c_cold) {
  const double cmin = std::min(c_hot, c_cold);
  const double cmax = std::max(c_hot, c_cold);
  if (cmin <= 0.0 || ua <= 0.0) return 0.0;
  const double ntu = ua / cmin;
  const double cr = cmin / cmax;
  if (std::abs(1.0 - cr) < 1e-9) return ntu / (1.0 + ntu);
  const double e = std::exp(-ntu * (1.0 - cr));
  return (1.0 - e) / (1.0 - cr * e);
}

double compute_pue(double p_system_w, double aux_w) {
  if (!(p_system_w > 0.0)) throw CoolingError("PUE undefined for non-positive system power");
  return (p_system_w + aux_w) / p_system_w;
}

// ---------------------------------------------------------------------------

double PidController::update(double setpoint, double measurement, double dt_s) {
  const double e = direction * (measurement - setpoint);
  if (!primed) {
    prev_error = e;
    primed = true;
  }
  const double d = dt_s > 0.0 ? (e - prev_error) / dt_s : 0.0;
  prev_error = e;
  double next_integral = integral + e * dt_s;
  const double trial = gains.kp * e + gains.ki * next_integral + gains.kd * d;
  const bool pushing_high = trial > out_max && e > 0.0;
  const bool pushing_low = trial < out_min && e < 0.0;
  if (!pushing_high && !pushing_low) integral = next_integral;
  if (gains.ki > 0.0) integral = std::clamp(integral, out_min / gains.ki, out_max / gains.ki);
  output = std::clamp(gains.kp * e + gains.ki * integral + gains.kd * d, out_min, out_max);
  return output;
}

void PidController::hold_at(double value) {
  output = std::clamp(value, out_min, out_max);
  integral = gains.ki > 0.0 ? output / gains.ki : 0.0;
  prev_error = 0.0;
  primed = false;
}

void validate(const CoolingInputs& inputs, int num_cdus) {
  if (static_cast<int>(inputs.cdu_heat_w.size()) != num_cdus) {
    throw CoolingError("expected " + std::to_string(num_cdus) + " CDU heat values, got " +
                       std::to_string(inputs.cdu_heat_w.size()));
  }
  for (double h : inputs.cdu_heat_w) {
    if (!std::isfinite(h) || h < 0.0) throw CoolingError("CDU heat must be finite and >= 0");
  }
  if (!(inputs.wetbulb_c >= -30.0 && inputs.wetbulb_c <= 45.0)) {
    throw CoolingError("wetbulb temperature outside [-30, 45] degC");
  }
  if (inputs.system_power_w && !(*inputs.system_power_w >= 0.0)) {
    throw CoolingError("system power must be >= 0");
  }
}

// ---------------------------------------------------------------------------

double pump_head_kpa(const PumpBankParams& pump, double speed, double flow_per_pump) {
  const double k = (pump.shutoff_head_kpa - pump.rated_head_kpa) / (pump.rated_flow_m3_s * pump.rated_flow_m3_s);
  return pump.shutoff_head_kpa * speed * speed - k * flow_per_pump * flow_per_pump;
}

double htw_header_dp_kpa(const CoolingParams& p, int pumps, double speed, double flow) {
  return pump_head_kpa(p.htwp, speed, flow / pumps) - p.htw_pipe_k_kpa_per_m3s2 * flow * flow;
}

double ct_header_pressure_kpa(const CoolingParams& p, int cells, double flow) {
  const double per_cell = flow / std::max(cells, 1);
  return p.ct_header_static_kpa + p.ct_header_k_kpa_per_m3s2 * per_cell * per_cell;
}

Hydraulics solve_hydraulics(const CoolingState& state, const CoolingParams& p) {
  Hydraulics h;
  const auto n = state.loop.cdus.size();
  h.cdu_secondary_m3_s.resize(n);
  h.cdu_primary_m3_s.resize(n);
  h.cdu_secondary_dp_kpa.resize(n);
  double primary = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const CduState& c = state.loop.cdus[i];
    h.cdu_secondary_m3_s[i] = c.pump_speed * p.cdu_secondary_rated_flow_m3_s;
    h.cdu_secondary_dp_kpa[i] = p.cdu_secondary_rated_dp_kpa * c.pump_speed * c.pump_speed;
    h.cdu_primary_m3_s[i] = c.valve * p.cdu_primary_max_flow_m3_s;
    primary += h.cdu_primary_m3_s[i];
  }
  h.htw_m3_s = primary + p.htw_bypass_flow_m3_s;
  const int n_htwp = state.staging.n_htwp;
  h.htw_pump_dp_kpa = pump_head_kpa(p.htwp, state.loop.htwp_speed, h.htw_m3_s / n_htwp);
  h.htw_header_dp_kpa = h.htw_pump_dp_kpa - p.htw_pipe_k_kpa_per_m3s2 * h.htw_m3_s * h.htw_m3_s;
  h.ctw_m3_s = state.staging.n_ctwp * state.loop.ctwp_speed * p.ctwp.rated_flow_m3_s;
  h.ct_header_kpa = ct_header_pressure_kpa(p, state.staging.n_ct, h.ctw_m3_s);
  return h;
}

// ---------------------------------------------------------------------------

int ehx_for_cells(int n_ct, const CoolingParams& p) {
  const int per = std::max(p.ct_cells_per_tower, 1);
  return std::clamp((n_ct + per - 1) / per, 1, p.ehx_count);
}

double htws_gradient_c_per_min(const LoopState& loop, const CoolingParams& p) {
  return (loop.t_htw_supply_c - loop.htws_delayed_c) / p.htws_delay_tau_s * 60.0;
}

namespace {

/// Shared hold-time state machine. Returns -1, 0 or +1.
int advance_timer(StageTimer& t, bool want_up, bool want_down, double hold_s, double dt_s) {
  t.since_change_s += dt_s;
  t.up_s = want_up ? t.up_s + dt_s : 0.0;
  t.down_s = want_down ? t.down_s + dt_s : 0.0;
  if (t.since_change_s < hold_s) return 0;
  int move = 0;
  if (t.up_s >= hold_s) {
    move = 1;
  } else if (t.down_s >= hold_s) {
    move = -1;
  }
  if (move != 0) {
    t.since_change_s = 0.0;
    t.up_s = 0.0;
    t.down_s = 0.0;
  }
  return move;
}

}  // namespace

StagingState stage_pumps(const CoolingState& state, const CoolingParams& p, double dt_s) {
  StagingState next = state.staging;
  const Hydraulics h = solve_hydraulics(state, p);

  {
    const int n = next.n_htwp;
    const double s = state.loop.htwp_speed;
    bool down = s <= p.htwp.stage_down_speed && n > 1;
    if (down) {
      const double q = h.htw_m3_s;
      const double k = (p.htwp.shutoff_head_kpa - p.htwp.rated_head_kpa) /
                       (p.htwp.rated_flow_m3_s * p.htwp.rated_flow_m3_s);
      const double need = p.htw_header_dp_setpoint_kpa + k * (q / (n - 1)) * (q / (n - 1)) +
                          p.htw_pipe_k_kpa_per_m3s2 * q * q;
      const double predicted = std::sqrt(std::max(need, 0.0) / p.htwp.shutoff_head_kpa);
      down = predicted < p.htwp.stage_up_speed;
    }
    const bool up = s >= p.htwp.stage_up_speed && n < p.htwp.count;
    next.n_htwp += advance_timer(next.htwp, up, down, p.staging_hold_s, dt_s);
  }
  {
    const int n = next.n_ctwp;
    const double s = state.loop.ctwp_speed;
    const bool up = s >= p.ctwp.stage_up_speed && n < p.ctwp.count;
    const bool down = n > 1 && s <= p.ctwp.stage_down_speed &&
                      s * n / (n - 1) < p.ctwp.stage_up_speed;
    next.n_ctwp += advance_timer(next.ctwp, up, down, p.staging_hold_s, dt_s);
  }
  next.n_ehx = ehx_for_cells(next.n_ct, p);
  return next;
}

StagingState stage_towers(const CoolingState& state, const CoolingParams& p, double dt_s) {
  StagingState next = state.staging;
  const Hydraulics h = solve_hydraulics(state, p);
  const int n = next.n_ct;
  const double grad = htws_gradient_c_per_min(state.loop, p);
  const double thr = p.htws_gradient_threshold_c_per_min;
  const double fan = state.loop.fan_speed;

  const bool up_signal = fan >= p.ct_fan_stage_up_speed || h.ct_header_kpa > p.ct_header_pressure_high_kpa ||
                         grad >= thr;
  const bool up = up_signal && n < p.ct_cells;
  const bool fan_low = fan <= p.ct_fan_stage_down_speed;
  const bool cooling_off = grad <= -thr && fan <= 0.5 * (p.ct_fan_stage_up_speed + p.ct_fan_stage_down_speed);
  bool down = !up_signal && n > 1 && (fan_low || cooling_off);
  if (down) down = ct_header_pressure_kpa(p, n - 1, h.ctw_m3_s) <= p.ct_header_pressure_high_kpa;
  next.n_ct = std::max(1, n + advance_timer(next.ct, up, down, p.staging_hold_s, dt_s));
  return next;
}

// ---------------------------------------------------------------------------

CoolingModel::CoolingModel(const Topology& topology, const CoolingParams& params, const ComponentPowerTable& power,
                           double cooling_efficiency)
    : topology_(topology),
      params_(params),
      power_(power),
      cooling_efficiency_(cooling_efficiency),
      rho_c_(params.water_density_kg_m3 * params.water_cp_j_kg_c) {}

namespace {

PidController make_pid(const PidGains& g, double lo, double hi, int direction) {
  PidController pid;
  pid.gains = g;
  pid.out_min = lo;
  pid.out_max = hi;
  pid.direction = direction;
  return pid;
}

}  // namespace

CoolingState CoolingModel::initial_state(const CoolingInputs& inputs) const {
  validate(inputs, topology_.num_cdus);
  const CoolingParams& p = params_;
  CoolingState s;
  const double heat = std::accumulate(inputs.cdu_heat_w.begin(), inputs.cdu_heat_w.end(), 0.0);
  const double wb = inputs.wetbulb_c;
  const double t_hs_target = p.htws_setpoint_c;

  // CDU actuators: valves sized so each HX meets its supply setpoint with HTWS on target
  s.loop.cdus.resize(static_cast<std::size_t>(topology_.num_cdus));
  const double cdu_speed =
      std::clamp(std::sqrt(p.cdu_secondary_dp_setpoint_kpa / p.cdu_secondary_rated_dp_kpa), kCduPumpMinSpeed, 1.0);
  const double cs = rho_c_ * cdu_speed * p.cdu_secondary_rated_flow_m3_s;
  for (std::size_t i = 0; i < s.loop.cdus.size(); ++i) {
    CduState& c = s.loop.cdus[i];
    c.pump_speed = cdu_speed;
    const double hi = inputs.cdu_heat_w[i];
    const double t_return = p.cdu_supply_setpoint_c + hi / cs;
    auto duty = [&](double valve) {
      const double cp = rho_c_ * valve * p.cdu_primary_max_flow_m3_s;
      return counterflow_effectiveness(p.cdu_hx_ua_w_c, cs, cp) * std::min(cs, cp) * (t_return - t_hs_target);
    };
    double lo = p.cdu_valve_min_opening, hi_v = 1.0;
    if (duty(lo) >= hi) {
      hi_v = lo;
    } else if (duty(hi_v) > hi) {
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi_v);
        (duty(mid) < hi ? lo : hi_v) = mid;
      }
    }
    c.valve = hi_v;
  }
  Hydraulics h = solve_hydraulics(s, p);

  // HTW pumps
  const double q_htw = h.htw_m3_s;
  const double k = (p.htwp.shutoff_head_kpa - p.htwp.rated_head_kpa) / (p.htwp.rated_flow_m3_s * p.htwp.rated_flow_m3_s);
  double s_req = 1.0;
  int n_htwp = 1;
  for (; n_htwp <= p.htwp.count; ++n_htwp) {
    const double need = p.htw_header_dp_setpoint_kpa + k * (q_htw / n_htwp) * (q_htw / n_htwp) +
                        p.htw_pipe_k_kpa_per_m3s2 * q_htw * q_htw;
    s_req = std::sqrt(need / p.htwp.shutoff_head_kpa);
    if (s_req <= p.htwp.stage_up_speed) break;
  }
  s.staging.n_htwp = std::min(n_htwp, p.htwp.count);
  s.loop.htwp_speed = std::clamp(s_req, p.htwp.min_speed, 1.0);

  // towers: fewest cells whose fan speed to hold HTWS on target stays moderate
  const double c_htw = rho_c_ * q_htw;
  double t_htw_return = t_hs_target + heat / c_htw;
  const double q_per_cell =
      std::sqrt(std::max(p.ct_header_pressure_setpoint_kpa - p.ct_header_static_kpa, 0.0) / p.ct_header_k_kpa_per_m3s2);
  const double q_ct_max = p.ctwp.count * p.ctwp.rated_flow_m3_s;
  const double min_ct_flow = p.ctwp.min_speed * p.ctwp.rated_flow_m3_s;
  int min_cells = 1;
  while (min_cells < p.ct_cells && ct_header_pressure_kpa(p, min_cells, min_ct_flow) > p.ct_header_pressure_high_kpa) {
    ++min_cells;
  }
  int cells = p.ct_cells;
  double fan = 1.0;
  if (heat <= 0.0) {
    cells = min_cells;
    fan = p.ct_fan_min_speed;
  } else {
    for (int n = min_cells; n <= p.ct_cells; ++n) {
      const double c_ct = rho_c_ * std::min(n * q_per_cell, q_ct_max);
      const double eps_ehx = counterflow_effectiveness(ehx_for_cells(n, p) * p.ehx_ua_per_unit_w_c, c_htw, c_ct);
      const double t_cs = t_htw_return - heat / (eps_ehx * std::min(c_htw, c_ct));
      const double t_cr = t_cs + heat / c_ct;
      if (t_cr <= wb) continue;
      const double eps_ct = heat / (c_ct * (t_cr - wb));
      if (eps_ct >= 1.0) continue;
      const double ua = -c_ct * std::log(1.0 - eps_ct);
      const double f = std::pow(ua / (n * p.ct_cell_ua_w_c), 1.0 / p.ct_fan_exponent);
      if (f <= 0.8) {
        cells = n;
        fan = std::max(f, p.ct_fan_min_speed);
        break;
      }
    }
  }
  s.staging.n_ct = cells;
  s.staging.n_ehx = ehx_for_cells(cells, p);
  const double q_ct_target = std::min(cells * q_per_cell, q_ct_max);
  int n_ctwp = 1;
  while (n_ctwp < p.ctwp.count && q_ct_target / (n_ctwp * p.ctwp.rated_flow_m3_s) > p.ctwp.stage_up_speed) ++n_ctwp;
  s.staging.n_ctwp = n_ctwp;
  s.loop.ctwp_speed = std::clamp(q_ct_target / (n_ctwp * p.ctwp.rated_flow_m3_s), p.ctwp.min_speed, 1.0);
  s.loop.fan_speed = fan;
  h = solve_hydraulics(s, p);

  // temperatures, back-substituted from the towers inward with the chosen actuators
  const double c_ct = rho_c_ * h.ctw_m3_s;
  const double ua_ct = s.staging.n_ct * p.ct_cell_ua_w_c *
                       std::pow(std::max(s.loop.fan_speed, p.ct_natural_draft_fraction), p.ct_fan_exponent);
  const double eps_ct = 1.0 - std::exp(-ua_ct / c_ct);
  s.loop.t_ctw_return_c = wb + heat / (eps_ct * c_ct);
  s.loop.t_ctw_supply_c = s.loop.t_ctw_return_c - heat / c_ct;
  const double eps_ehx = counterflow_effectiveness(s.staging.n_ehx * p.ehx_ua_per_unit_w_c, c_htw, c_ct);
  t_htw_return = s.loop.t_ctw_supply_c + heat / (eps_ehx * std::min(c_htw, c_ct));
  s.loop.t_htw_return_c = t_htw_return;
  s.loop.t_htw_supply_c = t_htw_return - heat / c_htw;
  s.loop.htws_delayed_c = s.loop.t_htw_supply_c;
  for (std::size_t i = 0; i < s.loop.cdus.size(); ++i) {
    CduState& c = s.loop.cdus[i];
    const double hi = inputs.cdu_heat_w[i];
    const double cp = rho_c_ * h.cdu_primary_m3_s[i];
    const double eps = counterflow_effectiveness(p.cdu_hx_ua_w_c, cs, cp);
    c.t_primary_c = s.loop.t_htw_supply_c + hi / cp;
    c.t_return_c = s.loop.t_htw_supply_c + hi / (eps * std::min(cs, cp));
    c.t_supply_c = c.t_return_c - hi / cs;
    c.pump_pid = make_pid(p.cdu_pump_pid, kCduPumpMinSpeed, 1.0, -1);
    c.pump_pid.hold_at(c.pump_speed);
    c.valve_pid = make_pid(p.cdu_valve_pid, p.cdu_valve_min_opening, 1.0, 1);
    c.valve_pid.hold_at(c.valve);
  }
  s.loop.htwp_pid = make_pid(p.htwp_pid, p.htwp.min_speed, 1.0, -1);
  s.loop.htwp_pid.hold_at(s.loop.htwp_speed);
  s.loop.ctwp_pid = make_pid(p.ctwp_pid, p.ctwp.min_speed, 1.0, -1);
  s.loop.ctwp_pid.hold_at(s.loop.ctwp_speed);
  s.loop.fan_pid = make_pid(p.fan_pid, p.ct_fan_min_speed, 1.0, 1);
  s.loop.fan_pid.hold_at(s.loop.fan_speed);
  return s;
}

void CoolingModel::substep(CoolingState& s, const CoolingInputs& in, double h) const {
  const CoolingParams& p = params_;
  const Hydraulics hy = solve_hydraulics(s, p);
  LoopState& L = s.loop;
  const std::size_t n = L.cdus.size();

  const double c_htw = rho_c_ * hy.htw_m3_s;
  const double c_bypass = rho_c_ * p.htw_bypass_flow_m3_s;
  const double c_ct = rho_c_ * hy.ctw_m3_s;
  const double cap_rack = rho_c_ * p.cdu_rack_volume_m3;
  const double cap_supply = rho_c_ * p.cdu_supply_volume_m3;
  const double cap_primary = rho_c_ * p.cdu_primary_volume_m3;

  std::vector<double> new_return(n), new_supply(n), new_primary(n);
  double mix_into_return = c_bypass * (L.t_htw_supply_c - L.t_htw_return_c);
  for (std::size_t i = 0; i < n; ++i) {
    const CduState& c = L.cdus[i];
    const double cs = rho_c_ * hy.cdu_secondary_m3_s[i];
    const double cp = rho_c_ * hy.cdu_primary_m3_s[i];
    const double eps = counterflow_effectiveness(p.cdu_hx_ua_w_c, cs, cp);
    const double q_hx = eps * std::min(cs, cp) * (c.t_return_c - L.t_htw_supply_c);
    new_return[i] = advance_volume(c.t_return_c, cap_rack, cs * (c.t_supply_c - c.t_return_c) + in.cdu_heat_w[i], h);
    new_supply[i] = advance_volume(c.t_supply_c, cap_supply, cs * (c.t_return_c - c.t_supply_c) - q_hx, h);
    new_primary[i] = advance_volume(c.t_primary_c, cap_primary, cp * (L.t_htw_supply_c - c.t_primary_c) + q_hx, h);
    mix_into_return += cp * (c.t_primary_c - L.t_htw_return_c);
  }

  const double eps_ehx = counterflow_effectiveness(s.staging.n_ehx * p.ehx_ua_per_unit_w_c, c_htw, c_ct);
  const double q_ehx = eps_ehx * std::min(c_htw, c_ct) * (L.t_htw_return_c - L.t_ctw_supply_c);
  const double ua_ct = s.staging.n_ct * p.ct_cell_ua_w_c *
                       std::pow(std::max(L.fan_speed, p.ct_natural_draft_fraction), p.ct_fan_exponent);
  const double eps_ct = c_ct > 0.0 ? 1.0 - std::exp(-ua_ct / c_ct) : 0.0;
  const double t_tower_out = L.t_ctw_return_c - eps_ct * (L.t_ctw_return_c - in.wetbulb_c);

  const double new_htw_return = advance_volume(L.t_htw_return_c, rho_c_ * p.htw_return_volume_m3, mix_into_return, h);
  const double new_htw_supply = advance_volume(L.t_htw_supply_c, rho_c_ * p.htw_supply_volume_m3,
                                               c_htw * (L.t_htw_return_c - L.t_htw_supply_c) - q_ehx, h);
  const double new_ctw_return = advance_volume(L.t_ctw_return_c, rho_c_ * p.ctw_return_volume_m3,
                                               c_ct * (L.t_ctw_supply_c - L.t_ctw_return_c) + q_ehx, h);
  const double new_ctw_supply = advance_volume(L.t_ctw_supply_c, rho_c_ * p.ctw_basin_volume_m3,
                                               c_ct * (t_tower_out - L.t_ctw_supply_c), h);

  auto commit = [&](double& slot, double value, const char* what) {
    check_finite(value, what, s.time_s);
    if (std::abs(value - slot) > p.max_substep_delta_c) {
      throw CoolingError(std::string("unstable substep: ") + what + " moved " + std::to_string(value - slot) +
                         " degC at t=" + std::to_string(s.time_s) + " s");
    }
    slot = value;
  };
  for (std::size_t i = 0; i < n; ++i) {
    commit(L.cdus[i].t_return_c, new_return[i], "CDU secondary return temperature");
    commit(L.cdus[i].t_supply_c, new_supply[i], "CDU secondary supply temperature");
    commit(L.cdus[i].t_primary_c, new_primary[i], "CDU primary return temperature");
  }
  commit(L.t_htw_return_c, new_htw_return, "HTW return temperature");
  commit(L.t_htw_supply_c, new_htw_supply, "HTW supply temperature");
  commit(L.t_ctw_return_c, new_ctw_return, "CTW return temperature");
  commit(L.t_ctw_supply_c, new_ctw_supply, "CTW supply temperature");

  // controls
  for (std::size_t i = 0; i < n; ++i) {
    CduState& c = L.cdus[i];
    c.pump_speed = c.pump_pid.update(p.cdu_secondary_dp_setpoint_kpa, hy.cdu_secondary_dp_kpa[i], h);
    c.valve = c.valve_pid.update(p.cdu_supply_setpoint_c, c.t_supply_c, h);
  }
  L.htwp_speed = L.htwp_pid.update(p.htw_header_dp_setpoint_kpa, hy.htw_header_dp_kpa, h);
  L.ctwp_speed = L.ctwp_pid.update(p.ct_header_pressure_setpoint_kpa, hy.ct_header_kpa, h);
  L.fan_speed = L.fan_pid.update(p.htws_setpoint_c, L.t_htw_supply_c, h);
  L.htws_delayed_c += h * (L.t_htw_supply_c - L.htws_delayed_c) / p.htws_delay_tau_s;

  s.staging = stage_towers(s, p, h);
  s.staging = stage_pumps(s, p, h);
  s.time_s += h;
}

CoolingStep CoolingModel::step(const CoolingState& state, const CoolingInputs& inputs, double dt_s) const {
  if (!(dt_s > 0.0)) throw CoolingError("dt must be > 0");
  validate(inputs, topology_.num_cdus);
  if (state.loop.cdus.size() != static_cast<std::size_t>(topology_.num_cdus)) {
    throw CoolingError("cooling state is not initialized for this topology");
  }
  const int n = std::max(1, static_cast<int>(std::ceil(dt_s / params_.substep_s - 1e-9)));
  const double h = dt_s / n;
  CoolingStep out{state, {}};
  for (int k = 0; k < n; ++k) substep(out.state, inputs, h);
  out.outputs = outputs(out.state, inputs);
  return out;
}

CoolingStep CoolingModel::warmup(const CoolingInputs& inputs, double seconds, double dt_s) const {
  CoolingStep out{initial_state(inputs), {}};
  const int steps = static_cast<int>(std::ceil(seconds / dt_s - 1e-9));
  for (int k = 0; k < steps; ++k) out = step(out.state, inputs, dt_s);
  if (steps == 0) out.outputs = outputs(out.state, inputs);
  return out;
}

AuxPower CoolingModel::aux_power(const CoolingState& s) const {
  const CoolingParams& p = params_;
  AuxPower a;
  a.cdu_pumps_w = topology_.num_cdus * power_.cdu_pump_w;
  const auto cube = [](double x) { return x * x * x; };
  a.htwp_w = s.staging.n_htwp * p.htwp.rated_power_w * cube(s.loop.htwp_speed);
  a.ctwp_w = s.staging.n_ctwp * p.ctwp.rated_power_w * cube(s.loop.ctwp_speed);
  a.ct_fans_w = s.staging.n_ct * p.ct_fan_rated_power_w * cube(s.loop.fan_speed);
  return a;
}

CoolingOutputs CoolingModel::outputs(const CoolingState& s, const CoolingInputs& in) const {
  const CoolingParams& p = params_;
  const Hydraulics hy = solve_hydraulics(s, p);
  const LoopState& L = s.loop;
  CoolingOutputs o;
  o.time_s = s.time_s;
  o.cdus.resize(L.cdus.size());
  for (std::size_t i = 0; i < L.cdus.size(); ++i) {
    const CduState& c = L.cdus[i];
    CduOutputs& co = o.cdus[i];
    co.pump_work_w = hy.cdu_secondary_m3_s[i] * hy.cdu_secondary_dp_kpa[i] * 1000.0;
    co.primary_flow_gpm = hy.cdu_primary_m3_s[i] * kGpmPerM3s;
    co.secondary_flow_gpm = hy.cdu_secondary_m3_s[i] * kGpmPerM3s;
    co.primary_supply_c = L.t_htw_supply_c;
    co.primary_return_c = c.t_primary_c;
    co.secondary_supply_c = c.t_supply_c;
    co.secondary_return_c = c.t_return_c;
    co.primary_supply_kpa = p.htw_static_pressure_kpa + hy.htw_header_dp_kpa;
    co.primary_return_kpa = p.htw_static_pressure_kpa;
    co.secondary_supply_kpa = p.cdu_secondary_base_pressure_kpa + hy.cdu_secondary_dp_kpa[i];
    co.secondary_return_kpa = p.cdu_secondary_base_pressure_kpa;
  }
  o.htw_flow_gpm = hy.htw_m3_s * kGpmPerM3s;
  o.ctw_flow_gpm = hy.ctw_m3_s * kGpmPerM3s;
  o.htw_supply_c = L.t_htw_supply_c;
  o.htw_return_c = L.t_htw_return_c;
  o.htw_supply_kpa = p.htw_static_pressure_kpa + hy.htw_pump_dp_kpa;
  o.htw_return_kpa = p.htw_static_pressure_kpa;
  o.n_htwp = s.staging.n_htwp;
  o.n_ehx = s.staging.n_ehx;
  o.n_ct = s.staging.n_ct;
  o.n_ctwp = s.staging.n_ctwp;
  const auto cube = [](double x) { return x * x * x; };
  o.htwp_power_w.assign(static_cast<std::size_t>(p.htwp.count), 0.0);
  o.htwp_speed.assign(static_cast<std::size_t>(p.htwp.count), 0.0);
  for (int k = 0; k < s.staging.n_htwp; ++k) {
    o.htwp_power_w[k] = p.htwp.rated_power_w * cube(L.htwp_speed);
    o.htwp_speed[k] = L.htwp_speed;
  }
  o.ctwp_power_w.assign(static_cast<std::size_t>(p.ctwp.count), 0.0);
  for (int k = 0; k < s.staging.n_ctwp; ++k) o.ctwp_power_w[k] = p.ctwp.rated_power_w * cube(L.ctwp_speed);
  o.fan_power_w.assign(static_cast<std::size_t>(p.ct_cells), 0.0);
  for (int k = 0; k < s.staging.n_ct; ++k) o.fan_power_w[k] = p.ct_fan_rated_power_w * cube(L.fan_speed);

  o.heat_in_w = std::accumulate(in.cdu_heat_w.begin(), in.cdu_heat_w.end(), 0.0);
  const double c_ct = rho_c_ * hy.ctw_m3_s;
  const double ua_ct = s.staging.n_ct * p.ct_cell_ua_w_c *
                       std::pow(std::max(L.fan_speed, p.ct_natural_draft_fraction), p.ct_fan_exponent);
  const double eps_ct = c_ct > 0.0 ? 1.0 - std::exp(-ua_ct / c_ct) : 0.0;
  o.heat_rejected_w = c_ct * eps_ct * (L.t_ctw_return_c - in.wetbulb_c);
  o.ctw_supply_c = L.t_ctw_supply_c;
  o.ctw_return_c = L.t_ctw_return_c;
  o.ct_header_kpa = hy.ct_header_kpa;
  o.wetbulb_c = in.wetbulb_c;
  o.aux = aux_power(s);
  o.system_power_w = in.system_power_w.value_or(o.heat_in_w / cooling_efficiency_ + o.aux.cdu_pumps_w);
  o.pue = o.system_power_w > 0.0 ? compute_pue(o.system_power_w, o.aux) : 1.0;
  return o;
}

// ---------------------------------------------------------------------------

std::vector<std::string> cooling_output_names(const Topology& topology, const CoolingParams& params) {
  static const char* cdu_fields[] = {"pump_work_w",          "primary_flow_gpm",     "secondary_flow_gpm",
                                     "primary_supply_c",     "primary_return_c",     "secondary_supply_c",
                                     "secondary_return_c",   "primary_supply_kpa",   "primary_return_kpa",
                                     "secondary_supply_kpa", "secondary_return_kpa"};
  std::vector<std::string> names;
  auto idx = [](int i) {
    std::string s = std::to_string(i);
    return s.size() < 2 ? "0" + s : s;
  };
  for (int c = 0; c < topology.num_cdus; ++c) {
    for (const char* f : cdu_fields) names.push_back("cdu_" + idx(c) + "_" + f);
  }
  for (const char* f : {"htw_flow_gpm", "ctw_flow_gpm", "htw_supply_c", "htw_return_c", "htw_supply_kpa",
                        "htw_return_kpa", "num_htwp_staging", "num_ehx_staging"}) {
    names.emplace_back(f);
  }
  for (int k = 0; k < params.htwp.count; ++k) names.push_back("htwp_" + idx(k) + "_power_w");
  for (int k = 0; k < params.htwp.count; ++k) names.push_back("htwp_" + idx(k) + "_speed");
  names.emplace_back("num_ct_staging");
  for (int k = 0; k < params.ctwp.count; ++k) names.push_back("ctwp_" + idx(k) + "_power_w");
  for (int k = 0; k < params.ct_cells; ++k) names.push_back("ct_fan_" + idx(k) + "_power_w");
  names.emplace_back("pue");
  return names;
}

std::vector<double> flatten(const CoolingOutputs& o) {
  std::vector<double> v;
  v.reserve(11 * o.cdus.size() + 16 + o.htwp_power_w.size() * 2 + o.ctwp_power_w.size() + o.fan_power_w.size());
  for (const CduOutputs& c : o.cdus) {
    v.insert(v.end(), {c.pump_work_w, c.primary_flow_gpm, c.secondary_flow_gpm, c.primary_supply_c,
                       c.primary_return_c, c.secondary_supply_c, c.secondary_return_c, c.primary_supply_kpa,
                       c.primary_return_kpa, c.secondary_supply_kpa, c.secondary_return_kpa});
  }
  v.insert(v.end(), {o.htw_flow_gpm, o.ctw_flow_gpm, o.htw_supply_c, o.htw_return_c, o.htw_supply_kpa,
                     o.htw_return_kpa, static_cast<double>(o.n_htwp), static_cast<double>(o.n_ehx)});
  v.insert(v.end(), o.htwp_power_w.begin(), o.htwp_power_w.end());
  v.insert(v.end(), o.htwp_speed.begin(), o.htwp_speed.end());
  v.push_back(static_cast<double>(o.n_ct));
  v.insert(v.end(), o.ctwp_power_w.begin(), o.ctwp_power_w.end());
  v.insert(v.end(), o.fan_power_w.begin(), o.fan_power_w.end());
  v.push_back(o.pue);
  return v;
}

}  // namespace dtwin
