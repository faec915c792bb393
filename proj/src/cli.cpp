#include "sympcool/cli.hpp"

#include <atomic>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sympcool/config.hpp"
#include "sympcool/constants.hpp"
#include "sympcool/error.hpp"

namespace sympcool::cli {

namespace {

namespace fs = std::filesystem;
using config::json;
using config::RunConfig;

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

struct Context {
  std::string command;
  RunConfig cfg;
  json doc;
  std::string hash;
  fs::path out;

  std::vector<std::string> header() const {
    return {std::string("sympcool ") + SYMPCOOL_VERSION, "command " + command, "config_hash " + hash,
            "seed " + std::to_string(cfg.global.seed)};
  }

  json metadata() const {
    return {{"tool", "sympcool"},
            {"version", SYMPCOOL_VERSION},
            {"command", command},
            {"config_hash", hash},
            {"seed", cfg.global.seed},
            {"config", doc}};
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream os(out / name);
    if (!os) throw std::runtime_error("cannot write " + (out / name).string());
    return os;
  }

  /// CSV file with the metadata header as comment lines.
  std::ofstream csv(const std::string& name) const {
    auto os = open(name);
    for (const auto& line : header()) os << "# " << line << '\n';
    return os;
  }

  void write_json(const std::string& name, json body) const {
    body["metadata"] = metadata();
    open(name) << std::setw(2) << body << '\n';
  }
};

json scales_json(const dynamics::ScaleSet& s) {
  return {{"d_m", s.d}, {"E_d_J", s.energy}, {"E_d_eV", s.energy / constants::kElectronVolt},
          {"tau_s", s.tau}, {"omega_rad_s", s.omega}};
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

/// Analytic predictions next to simulated statistics, all in trap periods. Points without
/// simulation data leave the simulation columns empty.
void write_model_compare(const Context& ctx, const std::string& name, double hot, double cold,
                         const std::vector<double>& grid, const ensemble::EnsembleResult* sim) {
  auto os = ctx.csv(name);
  os << std::setprecision(10) << "E0_over_Ed,tau_simple,tau_refined,tau_sim_mean,tau_sim_p10,tau_sim_p90\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double e0 = grid[k];
    os << e0 << ',' << models::scaled::simple_cooling_time(e0, hot, cold) << ',';
    if (e0 > std::cbrt(2.0)) os << models::scaled::refined_cooling_time(e0, hot, cold);
    os << ',';
    if (sim && sim->points[k].stats.crystallized > 0) {
      const auto& st = sim->points[k].stats;
      os << st.mean << ',' << st.p10 << ',' << st.p90;
    } else {
      os << ",,";
    }
    os << '\n';
  }
}

int cmd_simulate(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const std::size_t n_cold = cfg.species.n_cold.front();

  if (cfg.simulate.mode == "exchange_probe") {
    json probes = json::array();
    auto os = ctx.csv("exchange.csv");
    os << "probe,t_periods,E_hot,E_cold,E_total\n" << std::setprecision(12);
    for (std::size_t k = 0; k < cfg.simulate.probe_repeats; ++k) {
      std::mt19937_64 rng(ensemble::trial_seed(cfg.global.seed, 0, k));
      const auto r = ensemble::equal_mass_exchange_probe(cfg.simulate.e0_over_ed, cfg.simulate.probe_axis,
                                                         cfg.simulate.probe_duration_periods, rng, cfg.trap,
                                                         cfg.integration);
      for (const auto& s : r.series) os << k << ',' << s.t << ',' << s.hot << ',' << s.cold << ',' << s.total << '\n';
      probes.push_back({{"axis", r.axis},
                        {"axis_energy", r.axis_energy},
                        {"peaks", r.peaks},
                        {"envelope_period_periods", r.period},
                        {"exchange_time_periods", r.exchange_time},
                        {"predicted_exchange_periods", r.predicted_exchange},
                        {"predicted_from_axis_energy_periods", r.predicted_axis},
                        {"energy_drift", r.energy_drift}});
    }
    ctx.write_json("exchange.json", {{"e0_over_ed", cfg.simulate.e0_over_ed}, {"probes", probes}});
    return Success;
  }

  const dynamics::IonSystem system(cfg.species.hot, std::vector<dynamics::IonSpec>(n_cold, cfg.species.cold), cfg.trap);
  std::mt19937_64 rng(cfg.global.seed);
  const auto initial = ensemble::sample_initial(system, cfg.simulate.e0_over_ed, rng);
  const auto record = dynamics::integrate(system, initial, cfg.integration, cfg.global.seed);

  {
    auto os = ctx.csv("trajectory.csv");
    dynamics::write_trajectory_csv(os, record);
  }
  json body{{"verdict", dynamics::to_string(record.verdict.outcome)},
            {"verdict_time_periods", record.verdict_periods()},
            {"seed", record.seed},
            {"scales", scales_json(record.scales)},
            {"ground_energy", record.ground_energy},
            {"steps", record.steps},
            {"rejected_steps", record.rejected_steps},
            {"samples", record.samples.size()}};
  json fs_pos = json::array(), fs_vel = json::array();
  for (std::size_t k = 0; k < record.final_state.size(); ++k) {
    fs_pos.push_back(vec_json(record.final_state.positions[k]));
    fs_vel.push_back(vec_json(record.final_state.velocities[k]));
  }
  body["final_state"] = {{"t", record.final_state.time}, {"positions", fs_pos}, {"velocities", fs_vel}};
  if (cfg.trap.gamma == 0.0 && !record.samples.empty()) {
    const double e0 = record.samples.front().energy;
    double drift = 0.0;
    for (const auto& s : record.samples) drift = std::max(drift, std::abs(s.energy - e0) / std::abs(e0));
    body["conservation"] = {{"initial_energy", e0}, {"max_relative_drift", drift}};
  }
  ctx.write_json("trajectory.json", body);
  return Success;
}

int cmd_ensemble(const Context& ctx, bool resume) {
  const auto& cfg = ctx.cfg;
  std::ostringstream previous_csv;
  if (resume) {
    std::ifstream in(ctx.out / "scatter.csv");
    if (in) previous_csv << in.rdbuf();
  }

  json points = json::array();
  std::vector<ensemble::EnsembleResult> results;
  bool complete = true;
  for (std::size_t n : cfg.species.n_cold) {
    auto spec = cfg.ensemble;
    spec.n_cold = n;
    ensemble::RunOptions opts;
    opts.cancel = &g_interrupted;
    if (resume) {
      std::istringstream in(previous_csv.str());
      opts.previous = ensemble::read_scatter_csv(in, spec);
    }
    results.push_back(ensemble::run_ensemble(spec, opts));
    const auto& res = results.back();
    write_model_compare(ctx,
                        cfg.species.n_cold.size() == 1 ? "model-compare.csv"
                                                       : "model-compare_n" + std::to_string(n) + ".csv",
                        spec.hot.mass, spec.cold.mass, spec.e0_grid, &res);
    complete = complete && res.complete();
    for (const auto& p : res.points) {
      const auto& s = p.stats;
      points.push_back({{"E0_over_Ed", p.e0},
                        {"n_cold", p.n_cold},
                        {"trials", p.trials.size()},
                        {"crystallized", s.crystallized},
                        {"lost", s.lost},
                        {"timed_out", s.timed_out},
                        {"failed", s.failed},
                        {"pending", s.pending},
                        {"timed_out_fraction", s.timed_out_fraction()},
                        {"mean_periods", s.mean},
                        {"std_periods", s.stddev},
                        {"median_periods", s.median},
                        {"p10_periods", s.p10},
                        {"p90_periods", s.p90},
                        {"p90_over_p10", s.spread()},
                        {"model_periods", s.model_prediction},
                        {"mean_over_model", s.model_prediction > 0 ? s.mean / s.model_prediction : 0.0},
                        {"t_max_periods", spec.t_max_at(p.e0)}});
    }
    if (g_interrupted.load()) break;
  }

  {
    auto os = ctx.csv("scatter.csv");
    bool first = true;
    for (const auto& r : results) {
      std::ostringstream part;
      ensemble::write_scatter_csv(part, r);
      std::string text = part.str();
      if (!first) text = text.substr(text.find('\n') + 1);
      os << text;
      first = false;
    }
  }
  ctx.write_json("summary.json", {{"points", points}, {"complete", complete && !g_interrupted.load()}});
  return g_interrupted.load() ? Interrupted : Success;
}

int cmd_models(const Context& ctx) {
  const auto& m = ctx.cfg.models;
  const double omega = 2.0 * constants::kPi * m.frequency_hz;
  const bool si = m.units == "si";
  const auto scales = dynamics::derive_scales(m.hot_mass, omega);
  const double t_unit = si ? 1.0 : scales.tau;  // seconds per output time unit

  auto table = ctx.csv("models.csv");
  table << std::setprecision(10);
  table << (si ? "E0_eV,E0_over_Ed,tau_simple_s,tau_refined_s,tau_exchange_s,phonon_rate_estimate_per_s,phonon_gain_rate_per_s\n"
               : "E0_eV,E0_over_Ed,tau_simple_periods,tau_refined_periods,tau_exchange_periods,phonon_rate_estimate_per_period,phonon_gain_rate_per_period\n");
  auto curves = ctx.csv("curves.csv");
  curves << std::setprecision(10);
  curves << (si ? "model,E0_eV,t_s,E_eV\n" : "model,E0_over_Ed,t_periods,E_over_Ed\n");

  json rows = json::array();
  for (double e0_ev : m.e0_ev) {
    const auto p = models::AnalyticModelParams::from_si(m.hot_mass, m.cold_mass, omega, e0_ev * constants::kElectronVolt);
    const auto same = models::AnalyticModelParams::from_si(m.hot_mass, m.hot_mass, omega, p.initial_energy);
    const double simple = models::simple_cooling_time(p);
    const double refined = models::refined_cooling_time(p);
    const double exchange = models::exchange_time(same);
    const double estimate = models::phonon_rate_estimate(p.initial_energy, p.scales);
    const double gain = models::phonon_gain_rate(p.initial_energy, p, 2.0 * constants::kPi * m.readout_frequency_hz);
    table << e0_ev << ',' << p.e0_over_ed() << ',' << simple / t_unit << ',' << refined / t_unit << ','
          << exchange / t_unit << ',' << estimate * t_unit << ',' << gain * t_unit << '\n';
    rows.push_back({{"E0_eV", e0_ev}, {"E0_over_Ed", p.e0_over_ed()}, {"tau_simple_s", simple},
                    {"tau_refined_s", refined}, {"tau_exchange_s", exchange},
                    {"phonon_rate_estimate_per_s", estimate}, {"phonon_gain_rate_per_s", gain}});

    const auto emit = [&](const char* name, const models::CoolingCurve& c) {
      for (const auto& pt : c.points) {
        curves << name << ',' << (si ? e0_ev : p.e0_over_ed()) << ',' << pt.t / t_unit << ','
               << (si ? pt.energy / constants::kElectronVolt : pt.energy / p.scales.energy) << '\n';
      }
    };
    emit("simple", models::simple_cooling_curve(p, m.curve_points));
    emit("refined", models::refined_cooling_curve(p, m.curve_points));
  }
  write_model_compare(ctx, "model-compare.csv", m.hot_mass, m.cold_mass, ctx.cfg.ensemble.e0_grid, nullptr);
  ctx.write_json("models.json", {{"units", m.units}, {"scales", scales_json(scales)}, {"rows", rows}});
  return Success;
}

readout::EnergyProfile make_source(const config::SourceConfig& s) {
  if (s.kind == "none") return {[](double) { return 0.0; }, 0.0};
  const auto p = models::AnalyticModelParams::from_si(s.hot_mass, s.cold_mass, 2.0 * constants::kPi * s.frequency_hz,
                                                      s.e0_ev * constants::kElectronVolt);
  return readout::profile_from_model(p, s.load_time_s, s.lost_after_s);
}

int cmd_detect(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& d = cfg.detect;
  std::vector<readout::DetectionCycleRecord> cycles;
  json body{{"mode", d.mode}, {"bin", d.bin}};

  if (d.mode == "invert") {
    const std::string& path = d.input;
    std::ifstream in(path);
    if (!in) throw ConfigError("$.detect.input", "cannot open '" + path + "'");
    cycles = readout::read_cycles_csv(in);
  } else {
    std::mt19937_64 rng(cfg.global.seed);
    cycles = readout::synthesize_signal(make_source(cfg.source), cfg.protocol, d.cycles, rng);
    auto os = ctx.csv("cycles.csv");
    readout::write_cycles_csv(os, cycles);
    if (cfg.source.kind == "model") body["source_E0_eV"] = cfg.source.e0_ev;
  }
  body["cycles"] = cycles.size();

  if (d.mode != "synthesize") {
    const auto analysis = readout::estimate_energy(cycles, d.bin, cfg.protocol);
    auto os = ctx.csv("estimates.csv");
    readout::write_estimates_csv(os, analysis);
    const double ev = analysis.total_energy() / constants::kElectronVolt;
    body["recovered_E0_eV"] = ev;
    body["saturated_bins"] = analysis.saturated_bins;
    body["energy_floor_eV"] = analysis.energy_floor / constants::kElectronVolt;
    if (body.contains("source_E0_eV")) body["recovered_over_source"] = ev / cfg.source.e0_ev;
  }
  ctx.write_json("detect.json", body);
  return Success;
}

int cmd_velocity(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& v = cfg.velocity;
  std::vector<velocimetry::PhotonRecord> records;
  json body{{"mode", v.mode}};
  if (v.mode == "analyze") {
    const std::string& path = v.input;
    std::ifstream in(path);
    if (!in) throw ConfigError("$.velocity.input", "cannot open '" + path + "'");
    records = velocimetry::read_photons_csv(in, v.window_start.value_or(std::numeric_limits<double>::quiet_NaN()),
                                            v.window_end.value_or(std::numeric_limits<double>::quiet_NaN()));
    if (records.empty()) throw ConfigError("$.velocity.input", "no photons in '" + path + "'");
  } else {
    records = velocimetry::generate_plume(cfg.generator);
    auto os = ctx.csv("photons.csv");
    velocimetry::write_photons_csv(os, records);
    body["generator"] = {{"mode_velocity", cfg.generator.plume.mode_velocity},
                         {"spread", cfg.generator.plume.spread},
                         {"drift", cfg.generator.plume.drift()},
                         {"photons", cfg.generator.photons},
                         {"background_rate", cfg.generator.background_rate}};
  }

  if (v.gate_delay) {
    const auto gate = velocimetry::capture_window_filter(records, cfg.geometry, *v.gate_delay, *v.gate_width);
    body["gate"] = {{"delay_s", *v.gate_delay},
                    {"width_s", std::isfinite(*v.gate_width) ? json(*v.gate_width) : json(nullptr)},
                    {"v_min", gate.v_min},
                    {"v_max", std::isfinite(gate.v_max) ? json(gate.v_max) : json(nullptr)}};
  }

  const auto h = velocimetry::velocity_distribution(records, cfg.geometry, v.transition, cfg.analysis);
  {
    auto os = ctx.csv("histogram.csv");
    velocimetry::write_histogram_csv(os, h);
  }
  double peak = 0.0;
  try {
    peak = velocimetry::peak_velocity(h);
  } catch (const InvalidArgument&) {
    peak = 0.0;
  }
  body["transition"] = v.transition == velocimetry::TransitionMode::OpenTransition ? "open" : "closed";
  body["weighting"] = h.weighting == velocimetry::Weighting::PerPhoton ? "per_photon" : "flux_corrected";
  body["geometry"] = {{"d_target_m", cfg.geometry.d_target},
                      {"angle_deg", cfg.geometry.angle_deg},
                      {"wavelength_m", cfg.geometry.wavelength}};
  body["prompt_mask_s"] = cfg.analysis.prompt_mask;
  body["background_rate"] = h.hist.background_rate;
  body["raw_total"] = h.hist.raw_total;
  body["background_total"] = h.hist.background_total;
  body["clip_mass"] = h.hist.clip_mass;
  body["total"] = h.hist.total();
  body["peak_velocity"] = peak;
  ctx.write_json("velocity.json", body);
  return Success;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Sympathetic-cooling simulation and analysis toolkit", "sympcool"};
  app.set_version_flag("--version", std::string(SYMPCOOL_VERSION));
  app.require_subcommand(0, 1);

  std::string config_path, preset_name, out_dir, input;
  std::optional<std::uint64_t> seed;
  bool resume = false, gamma_zero = false, list_presets = false;
  app.add_flag("--list-presets", list_presets, "Print the built-in preset names");

  std::vector<CLI::App*> subs;
  const auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--preset", preset_name, "Built-in preset applied before --config");
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Master seed (overrides seed)");
    subs.push_back(sub);
    return sub;
  };
  add("simulate", "Integrate one trajectory or run the equal-mass exchange probe")
      ->add_flag("--gamma-zero", gamma_zero, "Disable friction and report energy conservation");
  add("ensemble", "Monte Carlo cooling-time ensembles")->add_flag("--resume", resume, "Reuse trials from scatter.csv");
  add("models", "Analytic cooling-time and exchange-time tables");
  add("detect", "Detection-cycle synthesis and energy inversion")
      ->add_option("--input", input, "Cycle CSV (invert mode)");
  add("velocity", "Plume generation and velocity-distribution analysis")
      ->add_option("--input", input, "Photon CSV (analyze mode)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Success : ConfigFailure;
  }

  if (list_presets) {
    for (const auto& name : config::preset_names()) std::cout << name << '\n';
    return Success;
  }
  CLI::App* chosen = nullptr;
  for (auto* s : subs)
    if (s->parsed()) chosen = s;
  if (!chosen) {
    std::cerr << app.help();
    return ConfigFailure;
  }

  Context ctx;
  ctx.command = chosen->get_name();
  try {
    json doc = json::object();
    if (!preset_name.empty()) doc = config::preset(preset_name);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("--config", "cannot open '" + config_path + "'");
      json user;
      try {
        user = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
      }
      if (!user.is_object()) throw ConfigError("$", "expected an object");
      doc.merge_patch(user);
    }
    if (seed) doc["seed"] = *seed;
    if (!out_dir.empty()) doc["output_dir"] = out_dir;
    if (gamma_zero) {
      doc["trap"]["gamma_over_omega_z"] = 0.0;
      doc["integration"]["stop_on_verdict"] = false;
    }
    if (!input.empty()) doc[ctx.command == "detect" ? "detect" : "velocity"]["input"] = input;
    ctx.doc = doc;
    ctx.cfg = config::parse(doc);
    // where the outputs go is not part of the run's identity
    json identity = doc;
    identity.erase("output_dir");
    ctx.hash = config::config_hash(identity);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ConfigFailure;
  }

  g_interrupted.store(false);
  const auto old_handler = std::signal(SIGINT, on_sigint);
  int code = Success;
  try {
    ctx.out = ctx.cfg.global.output_dir;
    fs::create_directories(ctx.out);
    if (ctx.command == "simulate")
      code = cmd_simulate(ctx);
    else if (ctx.command == "ensemble")
      code = cmd_ensemble(ctx, resume);
    else if (ctx.command == "models")
      code = cmd_models(ctx);
    else if (ctx.command == "detect")
      code = cmd_detect(ctx);
    else
      code = cmd_velocity(ctx);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    code = ConfigFailure;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    code = NumericalFailure;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    code = ConfigFailure;
  } catch (const OutOfRegime& e) {
    std::cerr << "out of model regime: " << e.what() << '\n';
    code = ConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = NumericalFailure;
  }
  std::signal(SIGINT, old_handler);
  if (code == Success) std::cout << "wrote " << ctx.out.string() << '\n';
  return code;
}

}  // namespace sympcool::cli
