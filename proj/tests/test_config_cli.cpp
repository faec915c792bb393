#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sympcool/cli.hpp"
#include "sympcool/config.hpp"
#include "sympcool/error.hpp"

using namespace sympcool;
using config::json;

namespace {

namespace fs = std::filesystem;

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sympcool");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("sympcool_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const json& doc) {
  try {
    config::parse(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults parse") {
  const auto cfg = config::parse(json::object());
  CHECK(cfg.global.seed == 1);
  CHECK(cfg.ensemble.trials_per_point == 40);
  CHECK(cfg.protocol.eta == doctest::Approx(0.03));
  CHECK(cfg.trap.gamma > 0.0);
}

TEST_CASE("errors name the offending field") {
  CHECK(error_of({{"trap", {{"bogus", 1}}}}).find("$.trap.bogus") != std::string::npos);
  CHECK(error_of({{"nonsense", {}}}).find("$.nonsense") != std::string::npos);
  CHECK(error_of({{"protocol", {{"eta", "high"}}}}).find("$.protocol.eta") != std::string::npos);
  CHECK(error_of({{"protocol", {{"eta", 1.5}}}}).find("$.protocol") != std::string::npos);
  CHECK(error_of({{"velocity", {{"transition", "sideways"}}}}).find("$.velocity.transition") != std::string::npos);
  CHECK(error_of({{"ensemble", {{"e0_grid", {0.5}}}}}).find("$.ensemble") != std::string::npos);
  CHECK(error_of({{"velocity", {{"gate", {{"delay_s", 1e-6}, {"extra", 2}}}}}}).find("$.velocity.gate.extra") !=
        std::string::npos);
}

TEST_CASE("shared blocks propagate into the ensemble and generator") {
  const auto cfg = config::parse({{"seed", 9},
                                  {"species", {{"cold_mass", 27.0}, {"n_cold", {1, 2}}}},
                                  {"trap", {{"gamma_over_omega_z", 0.0}}},
                                  {"geometry", {{"d_target_m", 0.03}}}});
  CHECK(cfg.ensemble.seed == 9);
  CHECK(cfg.ensemble.cold.mass == 27.0);
  CHECK(cfg.ensemble.trap.gamma == 0.0);
  CHECK(cfg.species.n_cold == std::vector<std::size_t>{1, 2});
  CHECK(cfg.generator.geom.d_target == doctest::Approx(0.03));
  CHECK(cfg.generator.seed == 9);
}

TEST_CASE("every preset parses") {
  for (const auto& name : config::preset_names()) {
    INFO(name);
    CHECK_NOTHROW(config::parse(config::preset(name)));
  }
  CHECK_THROWS_AS(config::preset("no-such-preset"), ConfigError);
}

TEST_CASE("config hash is canonical") {
  const json a = json::parse(R"({"seed": 3, "protocol": {"eta": 0.05, "wait_ms": 10}})");
  const json b = json::parse(R"({"protocol": {"wait_ms": 10, "eta": 0.05}, "seed": 3})");
  CHECK(config::config_hash(a) == config::config_hash(b));
  CHECK(config::config_hash(a) != config::config_hash(json::object()));
  CHECK(config::config_hash(a).size() == 16);
  // 64-bit FNV-1a test vectors
  CHECK(config::fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(config::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("bad configuration exits with code 2") {
  const auto dir = scratch("badcfg");
  std::ofstream(dir / "bad.json") << R"({"trap": {"frequencies_hz": [1e6, 1e6]}})";
  CHECK(run_cli({"models", "--config", (dir / "bad.json").string(), "--out", (dir / "o").string()}) == 2);
  std::ofstream(dir / "broken.json") << "{not json";
  CHECK(run_cli({"models", "--config", (dir / "broken.json").string()}) == 2);
  CHECK(run_cli({"models", "--preset", "nope"}) == 2);
  CHECK(run_cli({"models", "--no-such-flag"}) == 2);
  CHECK(run_cli({"detect", "--preset", "detect-roundtrip", "--out", (dir / "d").string()}) == 0);
  std::ofstream(dir / "inv.json") << R"({"detect": {"mode": "invert", "input": "/nonexistent.csv"}})";
  CHECK(run_cli({"detect", "--config", (dir / "inv.json").string(), "--out", (dir / "i").string()}) == 2);
}

TEST_CASE("models command writes the tables") {
  const auto dir = scratch("models");
  REQUIRE(run_cli({"models", "--out", dir.string()}) == 0);
  const auto table = slurp(dir / "models.csv");
  CHECK(table.rfind("# sympcool ", 0) == 0);
  CHECK(table.find("# config_hash ") != std::string::npos);
  CHECK(table.find("# seed 1") != std::string::npos);
  CHECK(table.find("E0_eV,E0_over_Ed,tau_simple_s") != std::string::npos);
  CHECK(fs::exists(dir / "curves.csv"));
  CHECK(slurp(dir / "model-compare.csv").find("E0_over_Ed,tau_simple,tau_refined,tau_sim_mean,tau_sim_p10,tau_sim_p90") !=
        std::string::npos);
  const auto meta = json::parse(slurp(dir / "models.json"));
  CHECK(meta["metadata"]["command"] == "models");
  CHECK(meta["rows"].size() == 3);
}

TEST_CASE("detect round trip and invert-only mode agree") {
  const auto dir = scratch("detect");
  REQUIRE(run_cli({"detect", "--preset", "detect-roundtrip", "--out", (dir / "rt").string()}) == 0);
  const auto rt = json::parse(slurp(dir / "rt" / "detect.json"));
  CHECK(rt["recovered_E0_eV"].get<double>() > 0.0);
  std::ofstream(dir / "inv.json") << R"({"detect": {"mode": "invert"}})";
  REQUIRE(run_cli({"detect", "--config", (dir / "inv.json").string(), "--input", (dir / "rt" / "cycles.csv").string(),
                   "--out", (dir / "inv").string()}) == 0);
  const auto inv = json::parse(slurp(dir / "inv" / "detect.json"));
  CHECK(inv["recovered_E0_eV"].get<double>() == doctest::Approx(rt["recovered_E0_eV"].get<double>()).epsilon(1e-9));
}

TEST_CASE("outputs are reproducible for a fixed seed") {
  const auto dir = scratch("repro");
  for (const char* sub : {"a", "b"})
    REQUIRE(run_cli({"velocity", "--preset", "velocity-al", "--seed", "4", "--out", (dir / sub).string()}) == 0);
  CHECK(slurp(dir / "a" / "histogram.csv") == slurp(dir / "b" / "histogram.csv"));
  REQUIRE(run_cli({"velocity", "--preset", "velocity-al", "--seed", "5", "--out", (dir / "c").string()}) == 0);
  CHECK(slurp(dir / "a" / "histogram.csv") != slurp(dir / "c" / "histogram.csv"));
  const auto v = json::parse(slurp(dir / "a" / "velocity.json"));
  CHECK(v["peak_velocity"].get<double>() == doctest::Approx(4500.0).epsilon(0.1));
  CHECK(v["metadata"]["seed"] == 4);
}

TEST_CASE("simulate with friction off reports conservation") {
  const auto dir = scratch("sim");
  std::ofstream(dir / "short.json") << R"({"integration": {"t_max_periods": 200}})";
  REQUIRE(run_cli({"simulate", "--preset", "two-ion", "--gamma-zero", "--config", (dir / "short.json").string(),
                   "--out", dir.string()}) == 0);
  const auto j = json::parse(slurp(dir / "trajectory.json"));
  CHECK(j["conservation"]["max_relative_drift"].get<double>() < 1e-6);
  CHECK(j["verdict"] == "timed_out");
  CHECK(fs::exists(dir / "trajectory.csv"));
}

TEST_CASE("ensemble resume keeps the scatter") {
  const auto dir = scratch("ens");
  std::ofstream(dir / "small.json") << R"({"ensemble": {"e0_grid": [10], "trials_per_point": 3}})";
  const auto cfg = (dir / "small.json").string();
  REQUIRE(run_cli({"ensemble", "--config", cfg, "--out", dir.string()}) == 0);
  const auto first = slurp(dir / "scatter.csv");
  REQUIRE(run_cli({"ensemble", "--config", cfg, "--out", dir.string(), "--resume"}) == 0);
  CHECK(slurp(dir / "scatter.csv") == first);
  CHECK(fs::exists(dir / "model-compare.csv"));
  const auto s = json::parse(slurp(dir / "summary.json"));
  CHECK(s["complete"] == true);
  CHECK(s["points"][0]["crystallized"].get<int>() + s["points"][0]["timed_out"].get<int>() +
            s["points"][0]["lost"].get<int>() ==
        3);
}
