#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "riskgate/config.hpp"
#include "riskgate/experiment.hpp"

using namespace riskgate;
namespace fs = std::filesystem;

namespace {

fs::path write_temp_config(const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("riskgate_cfg_" + std::to_string(::getpid()) + ".cfg");
  std::ofstream os(p);
  os << text;
  return p;
}

}  // namespace

TEST_CASE("defaults populate every registered key") {
  Config cfg;
  CHECK(cfg.get_int("gate.window_len") == 8);
  CHECK(cfg.get_double("gate.r_max") == 0.25);
  CHECK(cfg.get_int("gate.ensemble_size") == 5);
  CHECK(cfg.get_string("env.kind") == "glucose");
  CHECK(cfg.get_double_list("glucose.action_grid") == std::vector<double>{0, 0.5, 1, 2, 4});
}

TEST_CASE("file parsing with comments, sections and clock values") {
  const auto p = write_temp_config(
      "# experiment\n"
      "env.kind = nav\n"
      "gate.r_max = 0.1   # tighter filter\n"
      "glucose.meal_times = 07:30, 12:00\n"
      "\n");
  const Config cfg = Config::from_file(p);
  CHECK(cfg.get_string("env.kind") == "nav");
  CHECK(cfg.get_double("gate.r_max") == 0.1);
  const auto minutes = cfg.get_minutes_list("glucose.meal_times");
  REQUIRE(minutes.size() == 2);
  CHECK(minutes[0] == 450.0);
  CHECK(minutes[1] == 720.0);
  fs::remove(p);
}

TEST_CASE("unknown keys are hard errors listing every offender") {
  const auto p = write_temp_config("gate.rmax = 0.1\nagent.warmup = 3\n");
  try {
    Config::from_file(p);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("gate.rmax") != std::string::npos);
    CHECK(msg.find("agent.warmup") != std::string::npos);
  }
  fs::remove(p);
}

TEST_CASE("overrides validate keys and values") {
  Config cfg;
  cfg.apply_override("gate.r_max=0.5");
  CHECK(cfg.get_double("gate.r_max") == 0.5);
  CHECK_THROWS_AS(cfg.apply_override("gate.nope=1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("gate.r_max"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("gate.r_max=banana"), ConfigError);
}

TEST_CASE("content hash is stable and order independent") {
  Config a, b;
  a.apply_override("gate.r_max=0.5");
  a.apply_override("env.kind=nav");
  b.apply_override("env.kind=nav");
  b.apply_override("gate.r_max=0.5");
  CHECK(a.content_hash() == b.content_hash());
  b.apply_override("gate.r_max=0.25");
  CHECK(a.content_hash() != b.content_hash());
}

TEST_CASE("json round trip preserves every value") {
  Config cfg;
  cfg.apply_override("gate.window_len=16");
  cfg.apply_override("glucose.cohort=adolescent");
  const Config back = Config::from_json(cfg.to_json());
  CHECK(back.canonical() == cfg.canonical());
  CHECK(back.content_hash() == cfg.content_hash());
}

TEST_CASE("algorithm presets pin the documented keys") {
  Config cfg;
  cfg.set("run.algorithm", "unconstrained_q");
  const Config r = resolved_config(cfg);
  CHECK(r.get_int("gate.ensemble_size") == 1);
  CHECK(r.get_double("gate.lambda_risk") == 0.0);
  CHECK(r.get_double("gate.r_max") == 1.0);
  CHECK(r.get_double("agent.pin_risk") == 0.0);
  CHECK_FALSE(r.get_bool("agent.shield_enabled"));

  Config bad;
  bad.set("run.algorithm", "nonsense");
  CHECK_THROWS_AS(resolved_config(bad), ConfigError);
}

TEST_CASE("auto defaults resolve per environment") {
  Config glucose;
  const Config g = resolved_config(glucose);
  CHECK(g.get_double("gate.discount") == 0.98);
  CHECK(g.get_int("risk.horizon") == 1);
  CHECK(g.get_int("agent.warmup_steps") == 480);

  Config nav;
  nav.set("env.kind", "nav");
  const Config n = resolved_config(nav);
  CHECK(n.get_double("gate.discount") == 0.95);
  CHECK(n.get_int("risk.horizon") == 5);

  Config with_explicit;
  with_explicit.set("risk.horizon", "9");
  const Config w = resolved_config(with_explicit);
  CHECK(w.get_int("risk.horizon") == 9);  // explicit values win over autos
}
