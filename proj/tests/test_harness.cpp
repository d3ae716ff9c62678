#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "cpdoc/harness/config.hpp"
#include "cpdoc/harness/csv.hpp"
#include "cpdoc/harness/oracle.hpp"
#include "cpdoc/harness/report.hpp"
#include "cpdoc/harness/runner.hpp"

using namespace cpdoc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path p = fs::temp_directory_path() /
                     ("cpdoc_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string config_path(const char* name) {
  return std::string(CPDOC_CONFIG_DIR) + "/" + name;
}

// Small Four-Rooms OC experiment that finishes in well under a second.
ExperimentConfig tiny_oc(const fs::path& out_dir) {
  ExperimentConfig cfg;
  cfg.name = "tiny";
  cfg.env_type = "fourrooms";
  cfg.env_config_path = config_path("fourrooms.json");
  cfg.variant = Variant::OC;
  cfg.options = 4;
  cfg.episodes = 24;
  cfg.seeds = 2;
  cfg.base_seed = 7;
  cfg.agent.eps_action = 0.1;
  cfg.agent.eps_action_decay = 1.0;
  cfg.output.dir = out_dir.string();
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drop the wall-clock column: the one field allowed to differ between reruns.
std::string strip_last_column(const std::string& csv) {
  std::string out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    REQUIRE(pos != std::string::npos);
    out += line.substr(0, pos);
    out += '\n';
  }
  return out;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

// Minimal run directory accepted by the report loader.
void synth_run(const fs::path& dir, const std::string& name, const std::vector<double>& steps,
               int optimal, int switch_episode = 0) {
  fs::create_directories(dir);
  nlohmann::json meta;
  meta["format_version"] = 1;
  meta["name"] = name;
  meta["variant"] = "oc";
  meta["env_type"] = "fourrooms";
  meta["episodes"] = static_cast<int>(steps.size());
  meta["seeds"] = std::vector<int>{1};
  if (switch_episode > 0) {
    meta["switch_episode"] = switch_episode;
    meta["optimal_steps_final"] = optimal;
  } else {
    meta["switch_episode"] = nullptr;
  }
  meta["optimal_steps_initial"] = optimal;
  write_file(dir / "run_meta.json", meta.dump(1));
  std::string csv = "seed,episode,steps,return,cpd_f1\n";
  for (std::size_t i = 0; i < steps.size(); ++i)
    csv += "1," + std::to_string(i + 1) + "," + fmt_fixed(steps[i]) + ",1.000000,-1.000000\n";
  write_file(dir / "metrics.csv", csv);
}

}  // namespace

TEST_CASE("config errors name the offending fields") {
  nlohmann::json j;
  j["name"] = "bad";
  j["env"] = {{"type", "fourrooms"}, {"config_path", config_path("fourrooms.json")}};
  j["variant"] = "oc";
  j["episodes"] = 10;
  j["seeds"] = 1;
  REQUIRE_NOTHROW(experiment_from_json(j));

  auto expect_error_naming = [&](nlohmann::json bad, const std::string& field) {
    try {
      experiment_from_json(bad);
      FAIL("expected ConfigError for " + field);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };

  nlohmann::json bad_enum = j;
  bad_enum["variant"] = "bogus";
  expect_error_naming(bad_enum, "variant");

  nlohmann::json bad_type = j;
  bad_type["episodes"] = "ten";
  expect_error_naming(bad_type, "episodes");

  nlohmann::json unknown = j;
  unknown["mystery_knob"] = 1;
  expect_error_naming(unknown, "mystery_knob");

  nlohmann::json bad_nested = j;
  bad_nested["agent"] = {{"temperature", "cold"}};
  expect_error_naming(bad_nested, "agent.temperature");
}

TEST_CASE("validation rejects cross-field mistakes") {
  ExperimentConfig cfg = tiny_oc(fresh_dir("val"));

  SECTION("plain variant must not carry a deliberation margin") {
    cfg.agent.eta = 0.1;
    CHECK_THROWS_AS(experiment_validate(cfg), ConfigError);
  }
  SECTION("deliberation variant needs a positive margin") {
    cfg.variant = Variant::OCD;
    cfg.agent.eta = 0.0;
    CHECK_THROWS_AS(experiment_validate(cfg), ConfigError);
  }
  SECTION("goal switch may not target a wall") {
    cfg.goal_switches.push_back({10, 0, 0});
    CHECK_THROWS_AS(experiment_validate(cfg), ConfigError);
  }
  SECTION("goal switch must land inside the run") {
    cfg.goal_switches.push_back({cfg.episodes + 1, 2, 9});
    CHECK_THROWS_AS(experiment_validate(cfg), ConfigError);
  }
  SECTION("switch episodes must increase") {
    cfg.goal_switches.push_back({10, 2, 9});
    cfg.goal_switches.push_back({10, 7, 9});
    CHECK_THROWS_AS(experiment_validate(cfg), ConfigError);
  }
  SECTION("the tiny config itself is valid") {
    CHECK_NOTHROW(experiment_validate(cfg));
  }
}

TEST_CASE("tiny run produces a complete metrics table") {
  const fs::path dir = fresh_dir("table");
  ExperimentConfig cfg = tiny_oc(dir);
  const RunOutcome out = run_experiment(cfg, 1, 0);
  REQUIRE(out.ok_seeds == 2);
  REQUIRE(out.errors.empty());

  const CsvTable t = csv_read((dir / "metrics.csv").string());
  const std::vector<std::string> expect = {"seed",    "episode", "steps",   "return",
                                           "switches", "mean_option_len", "usage_0", "usage_1",
                                           "usage_2", "usage_3", "cpd_p",  "cpd_r",
                                           "cpd_f1",  "wall_ms"};
  REQUIRE(t.header == expect);
  REQUIRE(t.rows.size() == 2u * 24u);

  std::map<int, std::set<int>> eps_by_seed;
  for (const auto& row : t.rows) {
    const int seed = static_cast<int>(csv_num(row[0], "seed"));
    const int ep = static_cast<int>(csv_num(row[1], "episode"));
    CHECK(eps_by_seed[seed].insert(ep).second);  // no duplicates
    double usage = 0.0;
    for (int u = 6; u < 10; ++u) usage += csv_num(row[static_cast<std::size_t>(u)], "usage");
    CHECK_THAT(usage, Catch::Matchers::WithinAbs(1.0, 1e-6));
    // plain OC reports detector sentinels
    CHECK(csv_num(row[12], "f1") == -1.0);
  }
  REQUIRE(eps_by_seed.size() == 2);
  for (const auto& [seed, eps] : eps_by_seed) {
    CHECK(*eps.begin() == 1);
    CHECK(*eps.rbegin() == 24);
  }

  CHECK(fs::exists(dir / "checkpoints" / "seed_7.json"));
  CHECK(fs::exists(dir / "checkpoints" / "seed_8.json"));
  const nlohmann::json meta = nlohmann::json::parse(slurp(dir / "run_meta.json"));
  CHECK(meta.at("optimal_steps_initial").get<int>() == 9);
  CHECK(meta.at("switch_episode").is_null());
}

TEST_CASE("rerun is byte-identical minus wall time") {
  const fs::path d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
  ExperimentConfig cfg = tiny_oc(d1);
  run_experiment(cfg, 1, 0);
  cfg.output.dir = d2.string();
  run_experiment(cfg, 1, 0);
  CHECK(strip_last_column(slurp(d1 / "metrics.csv")) ==
        strip_last_column(slurp(d2 / "metrics.csv")));
}

TEST_CASE("parallel run equals sequential run") {
  const fs::path d1 = fresh_dir("par1"), d2 = fresh_dir("par2");
  ExperimentConfig cfg = tiny_oc(d1);
  cfg.seeds = 4;
  run_experiment(cfg, 1, 0);
  cfg.output.dir = d2.string();
  run_experiment(cfg, 4, 0);
  CHECK(strip_last_column(slurp(d1 / "metrics.csv")) ==
        strip_last_column(slurp(d2 / "metrics.csv")));
}

TEST_CASE("agent checkpoints round-trip") {
  const fs::path dir = fresh_dir("ckpt");
  ExperimentConfig cfg = tiny_oc(dir);
  cfg.seeds = 1;
  run_experiment(cfg, 1, 0);

  const nlohmann::json ck = nlohmann::json::parse(slurp(dir / "checkpoints" / "seed_7.json"));
  OptionCriticAgent fresh(cfg.options, FourRooms::kActions, 169, cfg.agent);
  agent_state_from_json(fresh, ck.at("agent"));
  CHECK(agent_state_to_json(fresh).dump() == ck.at("agent").dump());

  OptionCriticAgent wrong(cfg.options + 1, FourRooms::kActions, 169, cfg.agent);
  CHECK_THROWS_AS(agent_state_from_json(wrong, ck.at("agent")), CorruptedStateError);
}

TEST_CASE("goal switch is applied and recorded") {
  const fs::path dir = fresh_dir("switch");
  ExperimentConfig cfg = tiny_oc(dir);
  cfg.goal_switches.push_back({10, 2, 9});
  run_experiment(cfg, 1, 0);

  const nlohmann::json meta = nlohmann::json::parse(slurp(dir / "run_meta.json"));
  CHECK(meta.at("switch_episode").get<int>() == 10);
  const int initial = meta.at("optimal_steps_initial").get<int>();
  const int final_len = meta.at("optimal_steps_final").get<int>();
  CHECK(initial == 9);

  FourRooms env(fourrooms_load(cfg.env_config_path));
  env.set_goal(2, 9);
  CHECK(final_len == env.optimal_steps());
  CHECK(final_len != initial);
}

TEST_CASE("report arithmetic matches hand computation") {
  const fs::path root = fresh_dir("report");
  // Baseline holds 10 steps; the variant holds 5: a 50% improvement, and with
  // optimal = 5 its efficiency is exactly 1.0 against the baseline's 0.5.
  synth_run(root / "base", "base", std::vector<double>(6, 10.0), 5, 4);
  synth_run(root / "var", "var", std::vector<double>(6, 5.0), 5, 4);

  const fs::path out = root / "out";
  const nlohmann::json summary =
      build_report({(root / "base").string(), (root / "var").string()}, out.string());

  REQUIRE(summary.at("runs").size() == 2);
  const auto& base_phase = summary.at("runs").at(0).at("phases").at("pre-switch");
  const auto& var_phase = summary.at("runs").at(1).at("phases").at("pre-switch");
  CHECK_THAT(base_phase.at("mean").get<double>(), Catch::Matchers::WithinAbs(10.0, 1e-9));
  CHECK_THAT(var_phase.at("mean").get<double>(), Catch::Matchers::WithinAbs(5.0, 1e-9));
  CHECK_THAT(var_phase.at("improvement_pct").get<double>(),
             Catch::Matchers::WithinAbs(50.0, 1e-9));
  CHECK_THAT(base_phase.at("efficiency").get<double>(), Catch::Matchers::WithinAbs(0.5, 1e-9));
  CHECK_THAT(var_phase.at("efficiency").get<double>(), Catch::Matchers::WithinAbs(1.0, 1e-9));

  CHECK(fs::exists(out / "report.md"));
  const std::string svg = slurp(out / "curves.svg");
  CHECK(svg.find("Optimal: 5") != std::string::npos);

  synth_run(root / "short", "short", std::vector<double>(5, 9.0), 5);
  CHECK_THROWS_AS(
      build_report({(root / "base").string(), (root / "short").string()}, out.string()),
      ValidationError);
}

TEST_CASE("oracle values for the shipped layouts") {
  const nlohmann::json four = oracle_report(config_path("fourrooms.json"));
  CHECK(four.at("env") == "fourrooms");
  const int opt = four.at("optimal_steps").get<int>();
  CHECK(opt >= 8);
  CHECK(opt <= 10);

  const PinballConfig pb = pinball_load(config_path("pinball_simple_single.json"));
  const RandomFloor floor = pinball_random_floor(pb, 2, 424242);
  CHECK(std::isfinite(floor.mean_return));
  CHECK(floor.episodes == 2);
}

TEST_CASE("smoothing and phase statistics") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> sm = smooth_trailing(x, 3);
  REQUIRE(sm.size() == 5);
  CHECK_THAT(sm[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(sm[1], Catch::Matchers::WithinAbs(1.5, 1e-12));
  CHECK_THAT(sm[2], Catch::Matchers::WithinAbs(2.0, 1e-12));
  CHECK_THAT(sm[4], Catch::Matchers::WithinAbs(4.0, 1e-12));

  const std::vector<std::vector<double>> per_seed = {{2, 4}, {6, 8}};
  const PhaseStat st = phase_stat(per_seed, 1, 2);
  CHECK_THAT(st.mean, Catch::Matchers::WithinAbs(5.0, 1e-12));
  CHECK_THAT(st.sd, Catch::Matchers::WithinAbs(std::sqrt(8.0), 1e-12));
}

TEST_CASE("detector state is checkpointed for detector variants") {
  const fs::path dir = fresh_dir("cpdckpt");
  ExperimentConfig cfg = tiny_oc(dir);
  cfg.variant = Variant::CPD_OC;
  cfg.episodes = 6;
  cfg.seeds = 1;
  cfg.integration.warmup_episodes = 100;  // no inference in 6 episodes
  run_experiment(cfg, 1, 0);

  const nlohmann::json ck = nlohmann::json::parse(slurp(dir / "checkpoints" / "seed_7.json"));
  REQUIRE(ck.contains("cpd"));
  REQUIRE(ck.at("cpd").at("params").is_array());
  CHECK(!ck.at("cpd").at("params").empty());

  Rng rng(1);
  CPDModel model(169, FourRooms::kActions, true, cfg.cpd, rng);
  cpd_state_from_json(model, ck.at("cpd"));
  CHECK(cpd_state_to_json(model).dump() == ck.at("cpd").dump());
}
