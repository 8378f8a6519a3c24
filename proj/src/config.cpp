#include "dtwin/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace dtwin {

using json = nlohmann::json;

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::AcBaseline: return "AC_BASELINE";
    case LossMode::SmartStaging: return "SMART_STAGING";
    case LossMode::Dc380V: return "DC_380V";
  }
  return "AC_BASELINE";
}

LossMode parse_loss_mode(const std::string& text) {
  if (text == "AC_BASELINE") return LossMode::AcBaseline;
  if (text == "SMART_STAGING") return LossMode::SmartStaging;
  if (text == "DC_380V") return LossMode::Dc380V;
  throw ConfigError("loss_model.mode", "unknown mode '" + text + "'");
}

std::string to_string(SchedulingPolicy policy) {
  switch (policy) {
    case SchedulingPolicy::Fcfs: return "FCFS";
    case SchedulingPolicy::Sjf: return "SJF";
    case SchedulingPolicy::Replay: return "REPLAY";
  }
  return "FCFS";
}

SchedulingPolicy parse_policy(const std::string& text) {
  if (text == "FCFS") return SchedulingPolicy::Fcfs;
  if (text == "SJF") return SchedulingPolicy::Sjf;
  if (text == "REPLAY") return SchedulingPolicy::Replay;
  throw ConfigError("simulation.policy", "unknown policy '" + text + "'");
}

namespace {

// One binder drives both directions so the reader and writer cannot drift
// apart. In read mode every key of the source object must be consumed.
class Binder {
 public:
  static Binder reader(const json& source, std::string path) {
    Binder b;
    b.source_ = &source;
    b.path_ = std::move(path);
    if (!source.is_object()) throw ConfigError(b.path_, "expected an object");
    return b;
  }
  static Binder writer(json& sink, std::string path) {
    Binder b;
    b.sink_ = &sink;
    b.path_ = std::move(path);
    return b;
  }

  bool reading() const { return source_ != nullptr; }

  template <typename T>
  void field(const char* key, T& value) {
    if (!reading()) {
      (*sink_)[key] = value;
      return;
    }
    consumed_.insert(key);
    auto it = source_->find(key);
    if (it == source_->end()) return;
    try {
      value = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(child(key), "wrong type");
    }
  }

  template <typename Fn>
  void section(const char* key, Fn&& bind_child) {
    if (!reading()) {
      json child_json = json::object();
      Binder w = writer(child_json, child(key));
      bind_child(w);
      (*sink_)[key] = std::move(child_json);
      return;
    }
    consumed_.insert(key);
    auto it = source_->find(key);
    if (it == source_->end()) return;
    Binder r = reader(*it, child(key));
    bind_child(r);
    r.finish();
  }

  template <typename E>
  void enumeration(const char* key, E& value, std::string (*render)(E), E (*parse)(const std::string&)) {
    if (!reading()) {
      (*sink_)[key] = render(value);
      return;
    }
    consumed_.insert(key);
    auto it = source_->find(key);
    if (it == source_->end()) return;
    if (!it->is_string()) throw ConfigError(child(key), "expected a string");
    value = parse(it->template get<std::string>());
  }

  void curve(const char* key, std::vector<CurvePoint>& points) {
    if (!reading()) {
      json arr = json::array();
      for (const auto& p : points) arr.push_back({{"load_w", p.load_w}, {"efficiency", p.efficiency}});
      (*sink_)[key] = std::move(arr);
      return;
    }
    consumed_.insert(key);
    auto it = source_->find(key);
    if (it == source_->end()) return;
    if (!it->is_array()) throw ConfigError(child(key), "expected an array");
    points.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string where = child(key) + "[" + std::to_string(i) + "]";
      CurvePoint p;
      Binder r = reader((*it)[i], where);
      r.field("load_w", p.load_w);
      r.field("efficiency", p.efficiency);
      r.finish();
      points.push_back(p);
    }
  }

  void finish() const {
    if (!reading()) return;
    for (auto it = source_->begin(); it != source_->end(); ++it) {
      if (!consumed_.contains(it.key())) throw ConfigError(child(it.key()), "unknown field");
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json* source_ = nullptr;
  json* sink_ = nullptr;
  std::string path_;
  std::set<std::string> consumed_;
};

void bind(Binder& b, Topology& t) {
  b.field("num_cdus", t.num_cdus);
  b.field("racks_per_cdu", t.racks_per_cdu);
  b.field("chassis_per_rack", t.chassis_per_rack);
  b.field("rectifiers_per_rack", t.rectifiers_per_rack);
  b.field("blades_per_rack", t.blades_per_rack);
  b.field("nodes_per_rack", t.nodes_per_rack);
  b.field("sivocs_per_rack", t.sivocs_per_rack);
  b.field("switches_per_rack", t.switches_per_rack);
  b.field("nodes_total", t.nodes_total);
}

void bind(Binder& b, ComponentPowerTable& p) {
  b.field("cpu_idle_w", p.cpu_idle_w);
  b.field("cpu_max_w", p.cpu_max_w);
  b.field("gpu_idle_w", p.gpu_idle_w);
  b.field("gpu_max_w", p.gpu_max_w);
  b.field("ram_avg_w", p.ram_avg_w);
  b.field("nvme_unit_w", p.nvme_unit_w);
  b.field("nic_unit_w", p.nic_unit_w);
  b.field("switch_avg_w", p.switch_avg_w);
  b.field("cdu_pump_w", p.cdu_pump_w);
  b.field("cpus_per_node", p.cpus_per_node);
  b.field("gpus_per_node", p.gpus_per_node);
  b.field("nics_per_node", p.nics_per_node);
  b.field("nvme_per_node", p.nvme_per_node);
}

void bind(Binder& b, LossModelParams& l) {
  b.enumeration("mode", l.mode, &to_string, &parse_loss_mode);
  b.field("rectifier_eff_nominal", l.rectifier_eff_nominal);
  b.field("sivoc_eff_nominal", l.sivoc_eff_nominal);
  b.curve("rectifier_eff_curve", l.rectifier_eff_curve);
  b.field("rectifier_rated_w", l.rectifier_rated_w);
  b.field("dc_mode_efficiency", l.dc_mode_efficiency);
  b.field("switches_behind_rectifiers", l.switches_behind_rectifiers);
}

void bind(Binder& b, EconomicsParams& e) {
  b.field("emission_intensity_lbs_per_mwh", e.emission_intensity_lbs_per_mwh);
  b.field("lbs_per_metric_ton", e.lbs_per_metric_ton);
  b.field("electricity_usd_per_kwh", e.electricity_usd_per_kwh);
}

void bind(Binder& b, SimulationParams& s) {
  b.field("tick_s", s.tick_s);
  b.field("trace_quanta_s", s.trace_quanta_s);
  b.field("cooling_stride_ticks", s.cooling_stride_ticks);
  b.enumeration("policy", s.policy, &to_string, &parse_policy);
  b.field("seed", s.seed);
  b.field("cooling_efficiency", s.cooling_efficiency);
  b.field("cooling_enabled", s.cooling_enabled);
  b.field("wetbulb_c", s.wetbulb_c);
  b.field("cooling_warmup_s", s.cooling_warmup_s);
}

void bind(Binder& b, PidGains& g) {
  b.field("kp", g.kp);
  b.field("ki", g.ki);
  b.field("kd", g.kd);
}

void bind(Binder& b, PumpBankParams& p) {
  b.field("count", p.count);
  b.field("rated_power_w", p.rated_power_w);
  b.field("shutoff_head_kpa", p.shutoff_head_kpa);
  b.field("rated_head_kpa", p.rated_head_kpa);
  b.field("rated_flow_m3_s", p.rated_flow_m3_s);
  b.field("min_speed", p.min_speed);
  b.field("stage_up_speed", p.stage_up_speed);
  b.field("stage_down_speed", p.stage_down_speed);
}

void bind(Binder& b, CoolingParams& c) {
  b.field("water_density_kg_m3", c.water_density_kg_m3);
  b.field("water_cp_j_kg_c", c.water_cp_j_kg_c);
  b.field("substep_s", c.substep_s);
  b.field("max_substep_delta_c", c.max_substep_delta_c);
  b.field("cdu_rack_volume_m3", c.cdu_rack_volume_m3);
  b.field("cdu_supply_volume_m3", c.cdu_supply_volume_m3);
  b.field("cdu_primary_volume_m3", c.cdu_primary_volume_m3);
  b.field("cdu_secondary_rated_flow_m3_s", c.cdu_secondary_rated_flow_m3_s);
  b.field("cdu_secondary_rated_dp_kpa", c.cdu_secondary_rated_dp_kpa);
  b.field("cdu_secondary_dp_setpoint_kpa", c.cdu_secondary_dp_setpoint_kpa);
  b.field("cdu_secondary_base_pressure_kpa", c.cdu_secondary_base_pressure_kpa);
  b.field("cdu_primary_max_flow_m3_s", c.cdu_primary_max_flow_m3_s);
  b.field("cdu_valve_min_opening", c.cdu_valve_min_opening);
  b.field("cdu_valve_dp_kpa", c.cdu_valve_dp_kpa);
  b.field("cdu_hx_ua_w_c", c.cdu_hx_ua_w_c);
  b.field("cdu_supply_setpoint_c", c.cdu_supply_setpoint_c);
  b.section("cdu_pump_pid", [&](Binder& s) { bind(s, c.cdu_pump_pid); });
  b.section("cdu_valve_pid", [&](Binder& s) { bind(s, c.cdu_valve_pid); });
  b.field("htw_supply_volume_m3", c.htw_supply_volume_m3);
  b.field("htw_return_volume_m3", c.htw_return_volume_m3);
  b.field("htw_bypass_flow_m3_s", c.htw_bypass_flow_m3_s);
  b.field("htw_pipe_k_kpa_per_m3s2", c.htw_pipe_k_kpa_per_m3s2);
  b.field("htw_header_dp_setpoint_kpa", c.htw_header_dp_setpoint_kpa);
  b.field("htw_static_pressure_kpa", c.htw_static_pressure_kpa);
  b.section("htwp", [&](Binder& s) { bind(s, c.htwp); });
  b.section("htwp_pid", [&](Binder& s) { bind(s, c.htwp_pid); });
  b.field("ehx_count", c.ehx_count);
  b.field("ehx_ua_per_unit_w_c", c.ehx_ua_per_unit_w_c);
  b.field("ct_cells", c.ct_cells);
  b.field("ct_cells_per_tower", c.ct_cells_per_tower);
  b.field("ctw_return_volume_m3", c.ctw_return_volume_m3);
  b.field("ctw_basin_volume_m3", c.ctw_basin_volume_m3);
  b.field("ct_cell_ua_w_c", c.ct_cell_ua_w_c);
  b.field("ct_fan_exponent", c.ct_fan_exponent);
  b.field("ct_natural_draft_fraction", c.ct_natural_draft_fraction);
  b.field("ct_fan_rated_power_w", c.ct_fan_rated_power_w);
  b.field("ct_fan_min_speed", c.ct_fan_min_speed);
  b.field("ct_fan_stage_up_speed", c.ct_fan_stage_up_speed);
  b.field("ct_fan_stage_down_speed", c.ct_fan_stage_down_speed);
  b.field("ct_header_static_kpa", c.ct_header_static_kpa);
  b.field("ct_header_k_kpa_per_m3s2", c.ct_header_k_kpa_per_m3s2);
  b.field("ct_header_pressure_setpoint_kpa", c.ct_header_pressure_setpoint_kpa);
  b.field("ct_header_pressure_low_kpa", c.ct_header_pressure_low_kpa);
  b.field("ct_header_pressure_high_kpa", c.ct_header_pressure_high_kpa);
  b.field("ctw_loop_k_kpa_per_m3s2", c.ctw_loop_k_kpa_per_m3s2);
  b.section("ctwp", [&](Binder& s) { bind(s, c.ctwp); });
  b.section("ctwp_pid", [&](Binder& s) { bind(s, c.ctwp_pid); });
  b.field("htws_setpoint_c", c.htws_setpoint_c);
  b.section("fan_pid", [&](Binder& s) { bind(s, c.fan_pid); });
  b.field("htws_gradient_threshold_c_per_min", c.htws_gradient_threshold_c_per_min);
  b.field("htws_delay_tau_s", c.htws_delay_tau_s);
  b.field("staging_hold_s", c.staging_hold_s);
}

void bind(Binder& b, SystemConfig& c) {
  b.section("topology", [&](Binder& s) { bind(s, c.topology); });
  b.section("power", [&](Binder& s) { bind(s, c.power); });
  b.section("loss_model", [&](Binder& s) { bind(s, c.loss_model); });
  b.section("economics", [&](Binder& s) { bind(s, c.economics); });
  b.section("simulation", [&](Binder& s) { bind(s, c.simulation); });
  b.section("cooling", [&](Binder& s) { bind(s, c.cooling); });
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

void require_positive(int value, const std::string& field) {
  require(value > 0, field, "must be > 0");
}

void require_fraction(double value, const std::string& field) {
  require(std::isfinite(value) && value > 0.0 && value <= 1.0, field, "must be in (0, 1]");
}

void require_nonnegative(double value, const std::string& field) {
  require(std::isfinite(value) && value >= 0.0, field, "must be >= 0");
}

void validate_pump_bank(const PumpBankParams& p, const std::string& at) {
  require_positive(p.count, at + ".count");
  require(p.rated_power_w > 0.0, at + ".rated_power_w", "must be > 0");
  require(p.rated_flow_m3_s > 0.0, at + ".rated_flow_m3_s", "must be > 0");
  require(p.shutoff_head_kpa > p.rated_head_kpa && p.rated_head_kpa > 0.0, at + ".shutoff_head_kpa",
          "must exceed rated_head_kpa > 0");
  require(p.min_speed > 0.0 && p.min_speed < 1.0, at + ".min_speed", "must be in (0, 1)");
  require(p.stage_down_speed < p.stage_up_speed && p.stage_up_speed <= 1.0, at + ".stage_up_speed",
          "must exceed stage_down_speed and be <= 1");
}

}  // namespace

void validate(const SystemConfig& config) {
  const Topology& t = config.topology;
  require_positive(t.num_cdus, "topology.num_cdus");
  require_positive(t.racks_per_cdu, "topology.racks_per_cdu");
  require_positive(t.chassis_per_rack, "topology.chassis_per_rack");
  require_positive(t.blades_per_rack, "topology.blades_per_rack");
  require_positive(t.nodes_total, "topology.nodes_total");
  require(t.switches_per_rack >= 0, "topology.switches_per_rack", "must be >= 0");
  require(t.nodes_per_rack == 2 * t.blades_per_rack, "topology.nodes_per_rack", "must equal 2 x blades_per_rack");
  require(t.rectifiers_per_rack == 4 * t.chassis_per_rack, "topology.rectifiers_per_rack",
          "must equal 4 x chassis_per_rack");
  require(t.nodes_per_rack % t.chassis_per_rack == 0, "topology.chassis_per_rack", "must divide nodes_per_rack");
  require(t.switches_per_rack % t.chassis_per_rack == 0, "topology.switches_per_rack",
          "must be a multiple of chassis_per_rack");
  require(t.sivocs_per_rack > 0, "topology.sivocs_per_rack", "must be > 0");
  require(static_cast<long long>(t.nodes_total) <=
              static_cast<long long>(t.num_cdus) * t.racks_per_cdu * t.nodes_per_rack,
          "topology.nodes_total", "exceeds num_cdus x racks_per_cdu x nodes_per_rack");

  const ComponentPowerTable& p = config.power;
  for (auto [value, name] : {std::pair{p.cpu_idle_w, "cpu_idle_w"}, {p.cpu_max_w, "cpu_max_w"},
                             {p.gpu_idle_w, "gpu_idle_w"}, {p.gpu_max_w, "gpu_max_w"},
                             {p.ram_avg_w, "ram_avg_w"}, {p.nvme_unit_w, "nvme_unit_w"},
                             {p.nic_unit_w, "nic_unit_w"}, {p.switch_avg_w, "switch_avg_w"},
                             {p.cdu_pump_w, "cdu_pump_w"}}) {
    require_nonnegative(value, std::string("power.") + name);
  }
  require(p.cpu_idle_w <= p.cpu_max_w, "power.cpu_idle_w", "must be <= cpu_max_w");
  require(p.gpu_idle_w <= p.gpu_max_w, "power.gpu_idle_w", "must be <= gpu_max_w");
  require(p.cpus_per_node >= 0, "power.cpus_per_node", "must be >= 0");
  require(p.gpus_per_node >= 0, "power.gpus_per_node", "must be >= 0");
  require(p.nics_per_node >= 0, "power.nics_per_node", "must be >= 0");
  require(p.nvme_per_node >= 0, "power.nvme_per_node", "must be >= 0");

  const LossModelParams& l = config.loss_model;
  require_fraction(l.rectifier_eff_nominal, "loss_model.rectifier_eff_nominal");
  require_fraction(l.sivoc_eff_nominal, "loss_model.sivoc_eff_nominal");
  require_fraction(l.dc_mode_efficiency, "loss_model.dc_mode_efficiency");
  require(l.rectifier_rated_w > 0.0, "loss_model.rectifier_rated_w", "must be > 0");
  std::size_t peak = 0;
  for (std::size_t i = 0; i < l.rectifier_eff_curve.size(); ++i) {
    const auto& pt = l.rectifier_eff_curve[i];
    const std::string at = "loss_model.rectifier_eff_curve[" + std::to_string(i) + "]";
    require_fraction(pt.efficiency, at + ".efficiency");
    require_nonnegative(pt.load_w, at + ".load_w");
    if (i > 0) require(pt.load_w > l.rectifier_eff_curve[i - 1].load_w, at + ".load_w", "must be increasing");
    if (pt.efficiency > l.rectifier_eff_curve[peak].efficiency) peak = i;
  }
  for (std::size_t i = 1; i <= peak; ++i) {
    require(l.rectifier_eff_curve[i].efficiency >= l.rectifier_eff_curve[i - 1].efficiency,
            "loss_model.rectifier_eff_curve[" + std::to_string(i) + "].efficiency",
            "must be nondecreasing up to the peak");
  }

  const EconomicsParams& e = config.economics;
  require(e.emission_intensity_lbs_per_mwh > 0.0, "economics.emission_intensity_lbs_per_mwh", "must be > 0");
  require(e.lbs_per_metric_ton > 0.0, "economics.lbs_per_metric_ton", "must be > 0");
  require(e.electricity_usd_per_kwh > 0.0, "economics.electricity_usd_per_kwh", "must be > 0");

  const SimulationParams& s = config.simulation;
  require(s.tick_s > 0.0, "simulation.tick_s", "must be > 0");
  require(s.trace_quanta_s > 0.0, "simulation.trace_quanta_s", "must be > 0");
  require_positive(s.cooling_stride_ticks, "simulation.cooling_stride_ticks");
  require_fraction(s.cooling_efficiency, "simulation.cooling_efficiency");
  require(s.wetbulb_c >= -30.0 && s.wetbulb_c <= 45.0, "simulation.wetbulb_c", "must be within [-30, 45]");
  require_nonnegative(s.cooling_warmup_s, "simulation.cooling_warmup_s");

  const CoolingParams& c = config.cooling;
  require(c.substep_s > 0.0, "cooling.substep_s", "must be > 0");
  require(c.water_density_kg_m3 > 0.0, "cooling.water_density_kg_m3", "must be > 0");
  require(c.water_cp_j_kg_c > 0.0, "cooling.water_cp_j_kg_c", "must be > 0");
  for (auto [value, name] :
       {std::pair{c.cdu_rack_volume_m3, "cdu_rack_volume_m3"}, {c.cdu_supply_volume_m3, "cdu_supply_volume_m3"},
        {c.cdu_primary_volume_m3, "cdu_primary_volume_m3"}, {c.htw_supply_volume_m3, "htw_supply_volume_m3"},
        {c.htw_return_volume_m3, "htw_return_volume_m3"}, {c.ctw_return_volume_m3, "ctw_return_volume_m3"},
        {c.ctw_basin_volume_m3, "ctw_basin_volume_m3"}, {c.cdu_hx_ua_w_c, "cdu_hx_ua_w_c"},
        {c.ehx_ua_per_unit_w_c, "ehx_ua_per_unit_w_c"}, {c.ct_cell_ua_w_c, "ct_cell_ua_w_c"},
        {c.cdu_secondary_rated_flow_m3_s, "cdu_secondary_rated_flow_m3_s"},
        {c.cdu_primary_max_flow_m3_s, "cdu_primary_max_flow_m3_s"}}) {
    require(value > 0.0, std::string("cooling.") + name, "must be > 0");
  }
  require_fraction(c.cdu_valve_min_opening, "cooling.cdu_valve_min_opening");
  require_positive(c.ehx_count, "cooling.ehx_count");
  require_positive(c.ct_cells, "cooling.ct_cells");
  require_positive(c.ct_cells_per_tower, "cooling.ct_cells_per_tower");
  require(c.ct_fan_min_speed > 0.0 && c.ct_fan_min_speed < 1.0, "cooling.ct_fan_min_speed", "must be in (0, 1)");
  require(c.ct_header_pressure_low_kpa < c.ct_header_pressure_setpoint_kpa &&
              c.ct_header_pressure_setpoint_kpa < c.ct_header_pressure_high_kpa,
          "cooling.ct_header_pressure_setpoint_kpa", "must lie strictly inside the pressure band");
  require(c.ct_header_static_kpa < c.ct_header_pressure_setpoint_kpa, "cooling.ct_header_static_kpa",
          "must be below the header pressure setpoint");
  require_nonnegative(c.staging_hold_s, "cooling.staging_hold_s");
  require(c.htws_delay_tau_s > 0.0, "cooling.htws_delay_tau_s", "must be > 0");
  validate_pump_bank(c.htwp, "cooling.htwp");
  validate_pump_bank(c.ctwp, "cooling.ctwp");
}

SystemConfig config_from_json(const json& document) {
  SystemConfig config;
  Binder r = Binder::reader(document, "");
  bind(r, config);
  r.finish();
  validate(config);
  return config;
}

json config_to_json(const SystemConfig& config) {
  json out = json::object();
  SystemConfig copy = config;
  Binder w = Binder::writer(out, "");
  bind(w, copy);
  return out;
}

SystemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json document;
  try {
    in >> document;
  } catch (const json::parse_error& e) {
    throw ConfigError("", "malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(document);
}

NodeLocation map_node(const Topology& topology, int node_id) {
  if (node_id < 0 || node_id >= topology.nodes_total) {
    throw std::out_of_range("node id " + std::to_string(node_id) + " outside [0, " +
                            std::to_string(topology.nodes_total) + ")");
  }
  const int rack = node_id / topology.nodes_per_rack;
  const int in_rack = node_id % topology.nodes_per_rack;
  return NodeLocation{rack / topology.racks_per_cdu, rack, in_rack / topology.nodes_per_chassis(), in_rack / 2};
}

}  // namespace dtwin
