#include "sympcool/config.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "sympcool/constants.hpp"
#include "sympcool/error.hpp"

namespace sympcool::config {

namespace {

// Documents built in code store small integers as signed values; parsed text as unsigned.
bool is_non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

constexpr double kTwoPi = 2.0 * constants::kPi;

template <class F>
void checked(const std::string& path, F&& f) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  } catch (const OutOfRegime& e) {
    throw ConfigError(path, e.what());
  }
}

Vec3 triple(Section& s, const std::string& key, const Vec3& fallback) {
  const auto v = s.numbers(key, {fallback[0], fallback[1], fallback[2]});
  if (v.size() != 3) throw ConfigError(s.path_of(key), "expected three numbers");
  return Vec3{v[0], v[1], v[2]};
}

std::size_t count(Section& s, const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(s.unsigned_integer(key, fallback));
}

void parse_species(Section s, SpeciesConfig& out) {
  out.hot.mass = s.number("hot_mass", out.hot.mass);
  out.cold.mass = s.number("cold_mass", out.cold.mass);
  if (const json* n = s.raw("n_cold")) {
    out.n_cold.clear();
    const auto one = [&](const json& v) {
      if (!is_non_negative_integer(v) || v.get<std::int64_t>() < 1)
        throw ConfigError(s.path_of("n_cold"), "expected a positive integer or a list of them");
      out.n_cold.push_back(v.get<std::size_t>());
    };
    if (n->is_array()) {
      for (const auto& v : *n) one(v);
      if (out.n_cold.empty()) throw ConfigError(s.path_of("n_cold"), "list is empty");
    } else {
      one(*n);
    }
  }
  s.finish();
  checked("$.species", [&] {
    out.hot.validate();
    out.cold.validate();
  });
}

void parse_trap(Section s, dynamics::TrapConfig& trap) {
  const Vec3 hz = triple(s, "frequencies_hz", trap.omega_hot * (1.0 / kTwoPi));
  trap.omega_hot = hz * kTwoPi;
  const std::string scaling = s.choice("scaling", "static", {"static", "explicit"});
  trap.scaling = scaling == "static" ? dynamics::FrequencyScaling::StaticPotential : dynamics::FrequencyScaling::Explicit;
  if (trap.scaling == dynamics::FrequencyScaling::Explicit) {
    if (!s.has("cold_frequencies_hz")) throw ConfigError(s.path_of("cold_frequencies_hz"), "required for explicit scaling");
    trap.omega_cold = triple(s, "cold_frequencies_hz", {}) * kTwoPi;
  } else if (s.has("cold_frequencies_hz")) {
    throw ConfigError(s.path_of("cold_frequencies_hz"), "only allowed with explicit scaling");
  }
  const double g = s.number("gamma_over_omega_z", trap.gamma / trap.omega_hot[2]);
  trap.gamma = g * trap.omega_hot[2];
  s.finish();
  checked("$.trap", [&] { trap.validate(); });
}

void parse_integration(Section s, dynamics::IntegrationControls& c) {
  c.rel_tol = s.number("rel_tol", c.rel_tol);
  c.abs_tol = s.number("abs_tol", c.abs_tol);
  c.t_max_periods = s.number("t_max_periods", c.t_max_periods);
  c.sample_interval_periods = s.number("sample_interval_periods", c.sample_interval_periods);
  if (const json* r = s.raw("escape_radius")) {
    if (r->is_null())
      c.escape_radius = std::numeric_limits<double>::infinity();
    else if (r->is_number())
      c.escape_radius = r->get<double>();
    else
      throw ConfigError(s.path_of("escape_radius"), "expected a number or null");
  }
  c.crystal_threshold = s.number("crystal_threshold", c.crystal_threshold);
  c.crystal_window_periods = s.number("crystal_window_periods", c.crystal_window_periods);
  c.min_distance = s.number("min_distance", c.min_distance);
  c.stop_on_verdict = s.boolean("stop_on_verdict", c.stop_on_verdict);
  s.finish();
  checked("$.integration", [&] { c.validate(); });
}

void parse_simulate(Section s, SimulateConfig& c) {
  c.mode = s.choice("mode", c.mode, {"trajectory", "exchange_probe"});
  c.e0_over_ed = s.number("e0_over_ed", c.e0_over_ed);
  c.probe_axis = count(s, "probe_axis", c.probe_axis);
  c.probe_duration_periods = s.number("probe_duration_periods", c.probe_duration_periods);
  c.probe_repeats = count(s, "probe_repeats", c.probe_repeats);
  s.finish();
  if (!(c.e0_over_ed > 0.0)) throw ConfigError("$.simulate.e0_over_ed", "must be positive");
  if (c.probe_axis > 2) throw ConfigError("$.simulate.probe_axis", "must be 0, 1 or 2");
  if (!(c.probe_duration_periods > 0.0)) throw ConfigError("$.simulate.probe_duration_periods", "must be positive");
  if (c.probe_repeats < 1) throw ConfigError("$.simulate.probe_repeats", "must be at least 1");
}

void parse_ensemble(Section s, ensemble::EnsembleSpec& e) {
  e.e0_grid = s.numbers("e0_grid", e.e0_grid);
  e.trials_per_point = count(s, "trials_per_point", e.trials_per_point);
  e.t_max_periods = s.number("t_max_periods", e.t_max_periods);
  e.t_max_factor = s.number("t_max_factor", e.t_max_factor);
  s.finish();
}

void parse_models(Section s, ModelsConfig& m) {
  m.hot_mass = s.number("hot_mass", m.hot_mass);
  m.cold_mass = s.number("cold_mass", m.cold_mass);
  m.frequency_hz = s.number("frequency_hz", m.frequency_hz);
  m.e0_ev = s.numbers("e0_ev", m.e0_ev);
  m.units = s.choice("units", m.units, {"si", "scaled"});
  m.curve_points = count(s, "curve_points", m.curve_points);
  m.readout_frequency_hz = s.number("readout_frequency_hz", m.readout_frequency_hz);
  s.finish();
  if (!(m.hot_mass > 0.0)) throw ConfigError("$.models.hot_mass", "must be positive");
  if (!(m.cold_mass > 0.0)) throw ConfigError("$.models.cold_mass", "must be positive");
  if (!(m.frequency_hz > 0.0)) throw ConfigError("$.models.frequency_hz", "must be positive");
  if (!(m.readout_frequency_hz > 0.0)) throw ConfigError("$.models.readout_frequency_hz", "must be positive");
  if (m.e0_ev.empty()) throw ConfigError("$.models.e0_ev", "list is empty");
  for (double e : m.e0_ev)
    if (!(e > 0.0)) throw ConfigError("$.models.e0_ev", "energies must be positive");
  if (m.curve_points < 2) throw ConfigError("$.models.curve_points", "must be at least 2");
}

void parse_protocol(Section s, readout::DetectionProtocol& p) {
  p.cool_ms = s.number("cool_ms", p.cool_ms);
  p.wait_ms = s.number("wait_ms", p.wait_ms);
  p.detect_ms = s.number("detect_ms", p.detect_ms);
  p.cycles_per_s = s.number("cycles_per_s", p.cycles_per_s);
  p.eta = s.number("eta", p.eta);
  p.doppler_nbar = s.number("doppler_nbar", p.doppler_nbar);
  p.readout_omega = kTwoPi * s.number("readout_frequency_hz", p.readout_omega / kTwoPi);
  p.ambient_rate = s.number("ambient_rate", p.ambient_rate);
  p.interleave_control = s.boolean("interleave_control", p.interleave_control);
  const std::string model = s.choice("model", "rms", {"rms", "thermal"});
  p.model = model == "rms" ? readout::ExcitationModel::RmsCoupling : readout::ExcitationModel::ThermalAverage;
  p.nbar_ceiling = s.number("nbar_ceiling", p.nbar_ceiling);
  s.finish();
  checked("$.protocol", [&] { p.validate(); });
}

void parse_source(Section s, SourceConfig& c) {
  c.kind = s.choice("kind", c.kind, {"model", "none"});
  c.e0_ev = s.number("e0_ev", c.e0_ev);
  c.load_time_s = s.number("load_time_s", c.load_time_s);
  c.lost_after_s = s.optional_number("lost_after_s");
  c.hot_mass = s.number("hot_mass", c.hot_mass);
  c.cold_mass = s.number("cold_mass", c.cold_mass);
  c.frequency_hz = s.number("frequency_hz", c.frequency_hz);
  s.finish();
  if (!(c.load_time_s >= 0.0)) throw ConfigError("$.source.load_time_s", "must be non-negative");
  if (c.lost_after_s && !(*c.lost_after_s >= 0.0)) throw ConfigError("$.source.lost_after_s", "must be non-negative");
  if (c.kind == "model")
    checked("$.source", [&] {
      models::AnalyticModelParams::from_si(c.hot_mass, c.cold_mass, kTwoPi * c.frequency_hz,
                                           c.e0_ev * constants::kElectronVolt);
    });
}

void parse_detect(Section s, DetectConfig& c) {
  c.mode = s.choice("mode", c.mode, {"synthesize", "invert", "roundtrip"});
  c.cycles = count(s, "cycles", c.cycles);
  c.bin = count(s, "bin", c.bin);
  c.input = s.string("input", c.input);
  s.finish();
  if (c.bin < 50) throw ConfigError("$.detect.bin", "must be at least 50");
  if (c.mode == "invert" && c.input.empty()) throw ConfigError("$.detect.input", "required in invert mode");
  if (c.mode != "invert" && c.cycles < c.bin) throw ConfigError("$.detect.cycles", "must be at least one bin");
}

void parse_geometry(Section s, velocimetry::BeamGeometry& g) {
  g.d_target = s.number("d_target_m", g.d_target);
  g.angle_deg = s.number("angle_deg", g.angle_deg);
  g.wavelength = s.number("wavelength_m", g.wavelength);
  s.finish();
  checked("$.geometry", [&] { g.validate(); });
}

void parse_generator(Section s, velocimetry::GeneratorConfig& g) {
  g.plume.mode_velocity = s.number("mode_velocity", g.plume.mode_velocity);
  g.plume.spread = s.number("spread", g.plume.spread);
  g.photons = count(s, "photons", g.photons);
  g.background_rate = s.number("background_rate", g.background_rate);
  g.window_start = s.number("window_start_s", g.window_start);
  g.window_end = s.number("window_end_s", g.window_end);
  g.detunings = s.numbers("detunings_hz", g.detunings);
  g.prompt_photons = count(s, "prompt_photons", g.prompt_photons);
  g.prompt_width = s.number("prompt_width_s", g.prompt_width);
  s.finish();
}

void parse_analysis(Section s, velocimetry::AnalysisOptions& a) {
  a.prompt_mask = s.number("prompt_mask_s", a.prompt_mask);
  a.v_min = s.number("v_min", a.v_min);
  a.v_max = s.number("v_max", a.v_max);
  a.bins = count(s, "bins", a.bins);
  s.finish();
  checked("$.analysis", [&] { a.validate(); });
}

void parse_velocity(Section s, VelocityConfig& v) {
  v.mode = s.choice("mode", v.mode, {"closed_loop", "analyze"});
  const std::string t = s.choice("transition", "open", {"open", "closed"});
  v.transition = t == "open" ? velocimetry::TransitionMode::OpenTransition : velocimetry::TransitionMode::ClosedTransition;
  v.input = s.string("input", v.input);
  v.window_start = s.optional_number("window_start_s");
  v.window_end = s.optional_number("window_end_s");
  if (s.has("gate")) {
    Section g = s.child("gate");
    v.gate_delay = g.number("delay_s", 0.0);
    v.gate_width = g.number("width_s", std::numeric_limits<double>::infinity());
    g.finish();
    if (!(*v.gate_delay >= 0.0)) throw ConfigError("$.velocity.gate.delay_s", "must be non-negative");
    if (!(*v.gate_width > 0.0)) throw ConfigError("$.velocity.gate.width_s", "must be positive");
  }
  s.finish();
  if (v.mode == "analyze" && v.input.empty()) throw ConfigError("$.velocity.input", "required in analyze mode");
}

const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> table{
      {"two-ion", R"({"simulate": {"mode": "trajectory", "e0_over_ed": 30}})"},
      {"conservation",
       R"({"trap": {"gamma_over_omega_z": 0}, "simulate": {"e0_over_ed": 100},
           "integration": {"t_max_periods": 10000, "stop_on_verdict": false}})"},
      {"exchange-probe",
       R"({"species": {"cold_mass": 27}, "trap": {"gamma_over_omega_z": 0},
           "simulate": {"mode": "exchange_probe", "e0_over_ed": 100, "probe_duration_periods": 3000, "probe_repeats": 8}})"},
      {"unequal-mass",
       R"({"species": {"hot_mass": 27, "cold_mass": 40, "n_cold": 1},
           "ensemble": {"e0_grid": [10, 20, 30, 40, 60], "trials_per_point": 40}})"},
      {"equal-mass",
       R"({"species": {"hot_mass": 27, "cold_mass": 27, "n_cold": 1},
           "ensemble": {"e0_grid": [30], "trials_per_point": 40}})"},
      {"refrigerant-scaling",
       R"({"species": {"hot_mass": 27, "cold_mass": 27, "n_cold": [1, 2, 3]},
           "ensemble": {"e0_grid": [30], "trials_per_point": 40}})"},
      {"model-table", R"({"models": {"e0_ev": [0.1, 0.3, 1.0], "units": "si"}})"},
      {"detect-roundtrip", R"({"detect": {"mode": "roundtrip", "cycles": 9000, "bin": 250}})"},
      {"detect-control",
       R"({"protocol": {"interleave_control": true}, "detect": {"mode": "roundtrip", "cycles": 18000, "bin": 250}})"},
      {"transient-load",
       R"({"source": {"e0_ev": 1.0, "load_time_s": 20, "lost_after_s": 40}, "detect": {"mode": "roundtrip", "cycles": 5000}})"},
      {"velocity-al",
       R"({"velocity": {"mode": "closed_loop", "transition": "open"}, "generator": {"mode_velocity": 4500, "spread": 1350}})"},
      {"velocity-ca",
       R"({"velocity": {"mode": "closed_loop", "transition": "closed"}, "generator": {"mode_velocity": 1600, "spread": 480}})"},
      {"gate-slow",
       R"({"velocity": {"mode": "closed_loop", "transition": "closed", "gate": {"delay_s": 32e-6, "width_s": 1e-3}},
           "generator": {"mode_velocity": 1600, "spread": 480}})"},
      {"gate-fast",
       R"({"velocity": {"mode": "closed_loop", "transition": "open", "gate": {"delay_s": 0, "width_s": 7e-6}},
           "generator": {"mode_velocity": 4500, "spread": 1350}})"},
  };
  return table;
}

}  // namespace

const json Section::kEmpty = json::object();

Section::Section(const json& node, std::string path) : node_(&node), path_(std::move(path)) {
  if (!node_->is_object()) throw ConfigError(path_, "expected an object");
}

bool Section::has(const std::string& key) const { return node_->contains(key); }

const json* Section::lookup(const std::string& key) {
  used_.insert(key);
  const auto it = node_->find(key);
  return it == node_->end() ? nullptr : &*it;
}

const json* Section::raw(const std::string& key) { return lookup(key); }

double Section::number(const std::string& key, double fallback) {
  const json* v = lookup(key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(path_of(key), "expected a number");
  const double d = v->get<double>();
  if (!std::isfinite(d)) throw ConfigError(path_of(key), "must be finite");
  return d;
}

std::optional<double> Section::optional_number(const std::string& key) {
  const json* v = lookup(key);
  if (!v || v->is_null()) return std::nullopt;
  if (!v->is_number()) throw ConfigError(path_of(key), "expected a number or null");
  return v->get<double>();
}

std::uint64_t Section::unsigned_integer(const std::string& key, std::uint64_t fallback) {
  const json* v = lookup(key);
  if (!v) return fallback;
  if (!is_non_negative_integer(*v)) throw ConfigError(path_of(key), "expected a non-negative integer");
  return v->get<std::uint64_t>();
}

bool Section::boolean(const std::string& key, bool fallback) {
  const json* v = lookup(key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(path_of(key), "expected true or false");
  return v->get<bool>();
}

std::string Section::string(const std::string& key, const std::string& fallback) {
  const json* v = lookup(key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(path_of(key), "expected a string");
  return v->get<std::string>();
}

std::string Section::choice(const std::string& key, const std::string& fallback,
                            const std::vector<std::string>& allowed) {
  const std::string s = string(key, fallback);
  for (const auto& a : allowed)
    if (a == s) return s;
  std::string list;
  for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
  throw ConfigError(path_of(key), "unknown value '" + s + "' (allowed: " + list + ")");
}

std::vector<double> Section::numbers(const std::string& key, const std::vector<double>& fallback) {
  const json* v = lookup(key);
  if (!v) return fallback;
  if (!v->is_array()) throw ConfigError(path_of(key), "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v->size(); ++k) {
    const auto& e = (*v)[k];
    if (!e.is_number()) throw ConfigError(path_of(key) + "[" + std::to_string(k) + "]", "expected a number");
    out.push_back(e.get<double>());
  }
  return out;
}

Section Section::child(const std::string& key) {
  const json* v = lookup(key);
  return Section(v ? *v : kEmpty, path_of(key));
}

void Section::finish() const {
  for (auto it = node_->begin(); it != node_->end(); ++it)
    if (!used_.count(it.key())) throw ConfigError(path_of(it.key()), "unknown key");
}

RunConfig parse(const json& doc) {
  RunConfig rc;
  Section root(doc, "$");
  rc.global.seed = root.unsigned_integer("seed", rc.global.seed);
  rc.global.output_dir = root.string("output_dir", rc.global.output_dir);

  parse_species(root.child("species"), rc.species);
  parse_trap(root.child("trap"), rc.trap);
  parse_integration(root.child("integration"), rc.integration);
  parse_simulate(root.child("simulate"), rc.simulate);
  parse_ensemble(root.child("ensemble"), rc.ensemble);
  parse_models(root.child("models"), rc.models);
  parse_protocol(root.child("protocol"), rc.protocol);
  parse_source(root.child("source"), rc.source);
  parse_detect(root.child("detect"), rc.detect);
  parse_geometry(root.child("geometry"), rc.geometry);
  parse_generator(root.child("generator"), rc.generator);
  parse_analysis(root.child("analysis"), rc.analysis);
  parse_velocity(root.child("velocity"), rc.velocity);
  root.finish();

  rc.ensemble.hot = rc.species.hot;
  rc.ensemble.cold = rc.species.cold;
  rc.ensemble.n_cold = rc.species.n_cold.front();
  rc.ensemble.trap = rc.trap;
  rc.ensemble.controls = rc.integration;
  rc.ensemble.seed = rc.global.seed;
  checked("$.ensemble", [&] { rc.ensemble.validate(); });

  rc.generator.geom = rc.geometry;
  rc.generator.plume.transition = rc.velocity.transition;
  rc.generator.seed = rc.global.seed;
  checked("$.generator", [&] { rc.generator.validate(); });
  return rc;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : presets()) out.push_back(name);
  return out;
}

json preset(const std::string& name) {
  const auto it = presets().find(name);
  if (it == presets().end()) throw ConfigError("--preset", "unknown preset '" + name + "'");
  return json::parse(it->second);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& doc) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(doc.dump());
  return os.str();
}

}  // namespace sympcool::config
