#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "dtwin/cooling.hpp"

using namespace dtwin;

namespace {

CoolingInputs uniform_inputs(double it_mw, double wetbulb) {
  CoolingInputs in;
  in.cdu_heat_w.assign(25, it_mw * 1e6 * 0.945 / 25.0);
  in.wetbulb_c = wetbulb;
  in.system_power_w = it_mw * 1e6;
  return in;
}

CoolingState state_with(const CoolingModel& m, int n_ct, double fan, double grad_c_per_min) {
  CoolingState s = m.initial_state(uniform_inputs(15, 15));
  s.staging.n_ct = n_ct;
  s.loop.fan_speed = fan;
  s.loop.htws_delayed_c = s.loop.t_htw_supply_c - grad_c_per_min * m.params().htws_delay_tau_s / 60.0;
  s.staging.ct = StageTimer{};
  // one tower pump at 0.55 keeps the header below the high limit from 2 cells up
  s.staging.n_ctwp = 1;
  s.loop.ctwp_speed = 0.55;
  return s;
}

}  // namespace

TEST(CoolingPhysics, HeatExtracted) {
  // 997 kg/m3 * 0.035 m3/s * 10 K * 4186 J/kg/K
  EXPECT_NEAR(heat_extracted(997.0, 0.035, 10.0, 4186.0), 1460704.7, 1e-6);
}

TEST(CoolingPhysics, CounterflowEffectiveness) {
  // balanced exchanger: NTU / (1 + NTU)
  EXPECT_NEAR(counterflow_effectiveness(1000.0, 500.0, 500.0), 2.0 / 3.0, 1e-12);
  // Cr = 0.5, NTU = 1
  const double e = std::exp(-0.5);
  EXPECT_NEAR(counterflow_effectiveness(100.0, 100.0, 200.0), (1 - e) / (1 - 0.5 * e), 1e-12);
  EXPECT_NEAR(counterflow_effectiveness(100.0, 200.0, 100.0), (1 - e) / (1 - 0.5 * e), 1e-12);
  EXPECT_DOUBLE_EQ(counterflow_effectiveness(0.0, 1.0, 1.0), 0.0);
  EXPECT_LT(counterflow_effectiveness(1e9, 10.0, 20.0), 1.0 + 1e-12);
}

TEST(CoolingPhysics, Pue) {
  EXPECT_DOUBLE_EQ(compute_pue(20e6, 1e6), 1.05);
  AuxPower a{100.0, 200.0, 300.0, 400.0};
  EXPECT_DOUBLE_EQ(a.total(), 1000.0);
  EXPECT_DOUBLE_EQ(compute_pue(1e4, a), 1.1);
  EXPECT_THROW(compute_pue(0.0, 1.0), CoolingError);
}

TEST(CoolingPhysics, HeaderCurves) {
  CoolingParams p;
  EXPECT_NEAR(ct_header_pressure_kpa(p, 4, 0.4), 20.0 + 29744.0 * 0.01, 1e-9);
  EXPECT_NEAR(ct_header_pressure_kpa(p, 0, 0.1), 20.0 + 29744.0 * 0.01, 1e-9);
  // k = (400 - 250) / 0.15^2
  const double k = 150.0 / 0.0225;
  EXPECT_NEAR(pump_head_kpa(p.htwp, 1.0, 0.15), 250.0, 1e-9);
  EXPECT_NEAR(htw_header_dp_kpa(p, 2, 0.8, 0.3), 400 * 0.64 - k * 0.15 * 0.15 - 80 * 0.09, 1e-9);
}

TEST(CoolingPhysics, EhxFollowsCells) {
  CoolingParams p;
  EXPECT_EQ(ehx_for_cells(1, p), 1);
  EXPECT_EQ(ehx_for_cells(4, p), 1);
  EXPECT_EQ(ehx_for_cells(5, p), 2);
  EXPECT_EQ(ehx_for_cells(20, p), 5);
  EXPECT_EQ(ehx_for_cells(0, p), 1);
}

TEST(Pid, DirectionClampAndAntiWindup) {
  PidController pid;
  pid.gains = {0.1, 0.01, 0.0};
  pid.direction = 1;
  // measurement above setpoint raises output
  EXPECT_GT(pid.update(30.0, 32.0, 1.0), 0.0);
  pid = PidController{};
  pid.gains = {0.1, 0.01, 0.0};
  pid.direction = -1;
  EXPECT_DOUBLE_EQ(pid.update(30.0, 32.0, 1.0), 0.0);
  pid = PidController{};
  pid.gains = {1.0, 1.0, 0.0};
  for (int i = 0; i < 1000; ++i) pid.update(0.0, 10.0, 1.0);
  EXPECT_DOUBLE_EQ(pid.output, 1.0);
  // saturated for a long time, still recovers as soon as the error flips
  pid.update(0.0, -0.5, 1.0);
  EXPECT_LT(pid.output, 1.0);
}

TEST(Pid, HoldAtResumesFromValue) {
  PidController pid;
  pid.gains = {0.5, 0.1, 0.0};
  pid.hold_at(0.6);
  EXPECT_NEAR(pid.update(27.0, 27.0, 1.0), 0.6, 1e-12);
}

TEST(CoolingSchema, ExactlyThreeHundredSeventeenUniqueNames) {
  SystemConfig cfg;
  const auto names = cooling_output_names(cfg.topology, cfg.cooling);
  EXPECT_EQ(names.size(), 317u);
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
  EXPECT_EQ(names.front(), "cdu_00_pump_work_w");
  EXPECT_EQ(names.back(), "pue");
  CoolingModel m(cfg);
  const CoolingStep st = m.step(m.initial_state(uniform_inputs(10, 15)), uniform_inputs(10, 15), 15.0);
  EXPECT_EQ(flatten(st.outputs).size(), names.size());
}

TEST(CoolingModel, InputValidation) {
  SystemConfig cfg;
  CoolingModel m(cfg);
  CoolingInputs in = uniform_inputs(10, 15);
  in.cdu_heat_w.pop_back();
  EXPECT_THROW(validate(in, 25), CoolingError);
  in = uniform_inputs(10, 15);
  in.cdu_heat_w[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(m.step(m.initial_state(uniform_inputs(10, 15)), in, 15.0), CoolingError);
  EXPECT_THROW(m.step(m.initial_state(uniform_inputs(10, 15)), uniform_inputs(10, 15), 0.0), CoolingError);
  EXPECT_THROW(m.step(CoolingState{}, uniform_inputs(10, 15), 15.0), CoolingError);
}

TEST(CoolingModel, StepIsPure) {
  SystemConfig cfg;
  CoolingModel m(cfg);
  const CoolingState s0 = m.initial_state(uniform_inputs(12, 18));
  const CoolingState copy = s0;
  const CoolingStep a = m.step(s0, uniform_inputs(20, 18), 15.0);
  const CoolingStep b = m.step(s0, uniform_inputs(20, 18), 15.0);
  EXPECT_EQ(s0, copy);
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(flatten(a.outputs), flatten(b.outputs));
}

TEST(CoolingModel, ZeroHeatRelaxesToWetbulb) {
  SystemConfig cfg;
  CoolingModel m(cfg);
  CoolingInputs in = uniform_inputs(0, 12);
  in.system_power_w.reset();
  const CoolingStep st = m.warmup(in, 1800.0);
  EXPECT_NEAR(st.outputs.htw_supply_c, 12.0, 0.05);
  EXPECT_NEAR(st.outputs.ctw_supply_c, 12.0, 0.05);
  for (const CduOutputs& c : st.outputs.cdus) EXPECT_NEAR(c.secondary_supply_c, 12.0, 0.05);
  EXPECT_DOUBLE_EQ(st.outputs.heat_in_w, 0.0);
}

TEST(CoolingModel, ConservationAtModerateLoad) {
  SystemConfig cfg;
  CoolingModel m(cfg);
  const CoolingInputs in = uniform_inputs(15, 15);
  CoolingStep st = m.warmup(in, 1800.0);
  for (int k = 0; k < 240; ++k) st = m.step(st.state, in, 15.0);
  EXPECT_NEAR(st.outputs.heat_rejected_w / st.outputs.heat_in_w, 1.0, 0.01);
  EXPECT_GT(st.outputs.pue, 1.0);
  EXPECT_LT(st.outputs.pue, 1.2);
  EXPECT_NEAR(st.outputs.htw_supply_c, cfg.cooling.htws_setpoint_c, 0.5);
  for (const CduOutputs& c : st.outputs.cdus) EXPECT_NEAR(c.secondary_supply_c, 32.0, 0.5);
  EXPECT_EQ(st.outputs.n_ehx, ehx_for_cells(st.outputs.n_ct, cfg.cooling));
}

TEST(CoolingModel, AuxPowerMatchesCubeLaw) {
  SystemConfig cfg;
  CoolingModel m(cfg);
  const CoolingStep st = m.warmup(uniform_inputs(20, 20), 900.0);
  const AuxPower a = m.aux_power(st.state);
  const auto& p = cfg.cooling;
  EXPECT_DOUBLE_EQ(a.cdu_pumps_w, 25 * 8700.0);
  EXPECT_NEAR(a.htwp_w, st.state.staging.n_htwp * p.htwp.rated_power_w * std::pow(st.state.loop.htwp_speed, 3), 1e-6);
  EXPECT_NEAR(a.ct_fans_w, st.state.staging.n_ct * p.ct_fan_rated_power_w * std::pow(st.state.loop.fan_speed, 3),
              1e-6);
  EXPECT_NEAR(st.outputs.pue, (20e6 + a.total()) / 20e6, 1e-9);
}

TEST(Staging, TowerAddsCellWhenFanSaturated) {
  SystemConfig cfg;
  CoolingModel m(cfg);
  CoolingState s = state_with(m, 3, 0.99, 0.0);
  StagingState next = s.staging;
  for (int i = 0; i < 299; ++i) {
    s.staging = next;
    next = stage_towers(s, cfg.cooling, 1.0);
  }
  EXPECT_EQ(next.n_ct, 3);  // hold time not yet met
  s.staging = next;
  next = stage_towers(s, cfg.cooling, 1.0);
  EXPECT_EQ(next.n_ct, 4);
}

TEST(Staging, TowerSheddingNeedsLowFanAndKeepsOneCell) {
  SystemConfig cfg;
  CoolingModel m(cfg);
  CoolingState s = state_with(m, 2, 0.2, 0.0);
  s.loop.ctwp_speed = 0.18;  // one cell must still hold the flow
  EXPECT_EQ(stage_towers(s, cfg.cooling, 1.0).n_ct, 2);  // hold time not met
  s.staging.ct.down_s = 400.0;
  s.staging.ct.since_change_s = 1e9;
  EXPECT_EQ(stage_towers(s, cfg.cooling, 1.0).n_ct, 1);
  s.staging.n_ct = 1;
  EXPECT_EQ(stage_towers(s, cfg.cooling, 1000.0).n_ct, 1);
  // mid-range fan with flat temperature: no change
  CoolingState mid = state_with(m, 5, 0.6, 0.0);
  mid.staging.ct = StageTimer{1e4, 1e4, 1e9};
  EXPECT_EQ(stage_towers(mid, cfg.cooling, 1.0).n_ct, 5);
}

TEST(Staging, RisingSupplyTemperatureAddsCell) {
  SystemConfig cfg;
  CoolingModel m(cfg);
  CoolingState flat = state_with(m, 4, 0.5, 0.0);
  flat.staging.ct = StageTimer{299.0, 0.0, 1e9};
  EXPECT_EQ(stage_towers(flat, cfg.cooling, 1.0).n_ct, 4);
  CoolingState s = state_with(m, 4, 0.5, 0.3);
  EXPECT_GT(htws_gradient_c_per_min(s.loop, cfg.cooling), 0.1);
  s.staging.ct = StageTimer{299.0, 0.0, 1e9};
  EXPECT_EQ(stage_towers(s, cfg.cooling, 1.0).n_ct, 5);
}
