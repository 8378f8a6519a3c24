#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "dtwin/config.hpp"
#include "dtwin/scenario.hpp"

using namespace dtwin;
using nlohmann::json;

TEST(Config, FrontierDefaults) {
  SystemConfig c;
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.topology.num_cdus * c.topology.racks_per_cdu, 75);
  EXPECT_EQ(c.topology.populated_racks(), 74);
  EXPECT_EQ(c.topology.nodes_per_chassis(), 16);
  EXPECT_EQ(c.topology.rectifiers_per_chassis(), 4);
  EXPECT_EQ(c.topology.switches_per_chassis(), 4);
}

TEST(Config, JsonRoundTrip) {
  SystemConfig c;
  c.loss_model.mode = LossMode::SmartStaging;
  c.simulation.policy = SchedulingPolicy::Sjf;
  c.simulation.seed = 1234567890123ULL;
  c.cooling.fan_pid.kp = 0.123;
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
}

TEST(Config, ShippedFileEqualsDefaults) {
  EXPECT_EQ(load_config(std::filesystem::path(DTWIN_CONFIGS) / "frontier.json"), SystemConfig{});
}

TEST(Config, MissingKeysKeepDefaults) {
  SystemConfig c = config_from_json(json{{"simulation", {{"seed", 9}}}});
  EXPECT_EQ(c.simulation.seed, 9u);
  EXPECT_EQ(c.topology, Topology{});
}

TEST(Config, UnknownKeyNamesField) {
  try {
    config_from_json(json{{"loss_model", {{"rectifier_eff_nomial", 0.9}}}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "loss_model.rectifier_eff_nomial");
  }
  EXPECT_THROW(config_from_json(json{{"bogus", 1}}), ConfigError);
}

TEST(Config, InvariantViolationsNameField) {
  auto field_of = [](const json& doc) {
    try {
      config_from_json(doc);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of({{"loss_model", {{"rectifier_eff_nominal", 1.2}}}}), "loss_model.rectifier_eff_nominal");
  EXPECT_EQ(field_of({{"topology", {{"nodes_total", 99999}}}}), "topology.nodes_total");
  EXPECT_EQ(field_of({{"power", {{"cpu_idle_w", 500.0}}}}), "power.cpu_idle_w");
  EXPECT_EQ(field_of({{"simulation", {{"tick_s", 0.0}}}}), "simulation.tick_s");
  EXPECT_EQ(field_of({{"simulation", {{"policy", "LIFO"}}}}), "simulation.policy");
  EXPECT_EQ(field_of({{"loss_model", {{"mode", "AC"}}}}), "loss_model.mode");
  EXPECT_EQ(field_of({{"topology", {{"num_cdus", "25"}}}}), "topology.num_cdus");
}

TEST(Config, MapNodeIsDenseRowMajor) {
  Topology t;
  EXPECT_EQ(map_node(t, 0), (NodeLocation{0, 0, 0, 0}));
  EXPECT_EQ(map_node(t, 127), (NodeLocation{0, 0, 7, 63}));
  EXPECT_EQ(map_node(t, 128), (NodeLocation{0, 1, 0, 0}));
  EXPECT_EQ(map_node(t, 384), (NodeLocation{1, 3, 0, 0}));
  EXPECT_EQ(map_node(t, 9471).rack, 73);
  EXPECT_EQ(map_node(t, 9471).cdu, 24);
  EXPECT_THROW(map_node(t, 9472), std::out_of_range);
  EXPECT_THROW(map_node(t, -1), std::out_of_range);
}

TEST(Config, MapNodePropertyAgainstDivision) {
  Topology t;
  std::mt19937 rng(1);
  for (int i = 0; i < 5000; ++i) {
    const int id = static_cast<int>(rng() % 9472);
    const NodeLocation loc = map_node(t, id);
    EXPECT_EQ(loc.rack * 128 + loc.chassis * 16 + (id % 16), id);
    EXPECT_EQ(loc.cdu, loc.rack / 3);
    EXPECT_EQ(loc.blade, (id % 128) / 2);
  }
}

TEST(Settings, FlagBeatsEnvBeatsFile) {
  ::setenv("DTWIN_TEST_SETTING", "env", 1);
  EXPECT_EQ(resolve_setting(std::string("flag"), "DTWIN_TEST_SETTING", std::string("file")), "flag");
  EXPECT_EQ(resolve_setting(std::nullopt, "DTWIN_TEST_SETTING", std::string("file")), "env");
  ::unsetenv("DTWIN_TEST_SETTING");
  EXPECT_EQ(resolve_setting(std::nullopt, "DTWIN_TEST_SETTING", std::string("file")), "file");
  EXPECT_EQ(resolve_setting(std::nullopt, "DTWIN_TEST_SETTING", std::nullopt), std::nullopt);
}

TEST(Scenario, MergeKeepsBaseAndRejectsUnknown) {
  SystemConfig base;
  base.simulation.seed = 42;
  SystemConfig m = merge_config(base, {{"loss_model", {{"mode", "DC_380V"}}}});
  EXPECT_EQ(m.simulation.seed, 42u);
  EXPECT_EQ(m.loss_model.mode, LossMode::Dc380V);
  try {
    merge_config(base, {{"loss_model", {{"moode", "DC_380V"}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "config.loss_model.moode");
  }
}

TEST(Scenario, RequestSchemaIsStrict) {
  EXPECT_THROW(build_scenario({{"duration", 10}}), ConfigError);
  EXPECT_THROW(build_scenario({{"workload", {{"kind", "synthetic"}, {"seed", 1}}}}), ConfigError);
  EXPECT_THROW(build_scenario({{"workload", {{"kind", "nope"}}}}), ConfigError);
  EXPECT_THROW(build_scenario({{"duration_s", -1}}), ConfigError);
  EXPECT_THROW(build_scenario({{"wetbulb", {{"time_s", {0, 1}}, {"wetbulb_c", {5}}}}}), ConfigError);
  const Scenario sc = build_scenario({{"duration_s", 600}, {"workload", {{"kind", "synthetic"}}}});
  EXPECT_EQ(sc.kind, WorkloadKind::Synthetic);
  EXPECT_FALSE(sc.jobs.empty());
}
