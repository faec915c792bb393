#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sympcool/detection.hpp"
#include "sympcool/ensemble.hpp"
#include "sympcool/velocimetry.hpp"

namespace sympcool::config {

using nlohmann::json;

/// Typed access to one JSON object that remembers which keys were read, so that leftovers
/// can be rejected with their full path.
class Section {
 public:
  Section(const json& node, std::string path);

  bool has(const std::string& key) const;
  double number(const std::string& key, double fallback);
  std::optional<double> optional_number(const std::string& key);
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key, const std::string& fallback);
  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
  Section child(const std::string& key);
  /// Raw sub-value; marks the key as read.
  const json* raw(const std::string& key);

  std::string path_of(const std::string& key) const { return path_ + "." + key; }
  /// Throws ConfigError for the first key that was never read.
  void finish() const;

 private:
  const json* lookup(const std::string& key);

  const json* node_;
  std::string path_;
  std::set<std::string> used_;
  static const json kEmpty;
};

struct GlobalConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

struct SpeciesConfig {
  dynamics::IonSpec hot = dynamics::aluminium27();
  dynamics::IonSpec cold = dynamics::calcium40();
  std::vector<std::size_t> n_cold{1};
};

struct SimulateConfig {
  std::string mode = "trajectory";  // or "exchange_probe"
  double e0_over_ed = 30.0;
  std::size_t probe_axis = 2;
  double probe_duration_periods = 3000.0;
  std::size_t probe_repeats = 1;
};

struct ModelsConfig {
  double hot_mass = 27.0;
  double cold_mass = 40.0;
  double frequency_hz = 1e6;
  std::vector<double> e0_ev{0.1, 0.3, 1.0};
  std::string units = "si";  // or "scaled"
  std::size_t curve_points = 256;
  double readout_frequency_hz = 2e6;
};

struct SourceConfig {
  std::string kind = "model";  // or "none"
  double e0_ev = 0.3;
  double load_time_s = 20.0;
  std::optional<double> lost_after_s;
  double hot_mass = 27.0;
  double cold_mass = 40.0;
  double frequency_hz = 1e6;
};

struct DetectConfig {
  std::string mode = "roundtrip";  // synthesize | invert | roundtrip
  std::size_t cycles = 9000;
  std::size_t bin = 250;
  std::string input;  // cycle CSV for invert mode
};

struct VelocityConfig {
  std::string mode = "closed_loop";  // or "analyze"
  velocimetry::TransitionMode transition = velocimetry::TransitionMode::OpenTransition;
  std::string input;  // photon CSV for analyze mode
  std::optional<double> window_start;
  std::optional<double> window_end;
  std::optional<double> gate_delay;
  std::optional<double> gate_width;
};

/// Every block of a run configuration, validated and defaulted.
struct RunConfig {
  GlobalConfig global;
  SpeciesConfig species;
  dynamics::TrapConfig trap = dynamics::default_trap();
  dynamics::IntegrationControls integration;
  SimulateConfig simulate;
  ensemble::EnsembleSpec ensemble;
  ModelsConfig models;
  readout::DetectionProtocol protocol;
  SourceConfig source;
  DetectConfig detect;
  velocimetry::BeamGeometry geometry;
  velocimetry::GeneratorConfig generator;
  velocimetry::AnalysisOptions analysis;
  VelocityConfig velocity;
};

/// Parses and validates a configuration document; throws ConfigError with a field path.
RunConfig parse(const json& doc);

/// Names of the built-in presets.
std::vector<std::string> preset_names();
/// Preset document; throws ConfigError for an unknown name.
json preset(const std::string& name);

/// 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a(const std::string& bytes);
/// Hash of the canonical (sorted-key, compact) serialisation.
std::string config_hash(const json& doc);

}  // namespace sympcool::config
