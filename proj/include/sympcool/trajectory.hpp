#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sympcool/dynamics.hpp"

namespace sympcool::dynamics {

/// Integration and termination settings. Times are in trap periods of the reference
/// frequency, lengths in d, energies in E_d.
struct IntegrationControls {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double t_max_periods = 1e4;
  double sample_interval_periods = 0.5;
  double escape_radius = std::numeric_limits<double>::infinity();
  double crystal_threshold = 0.1;
  double crystal_window_periods = 20.0;
  double min_distance = 1e-4;
  bool stop_on_verdict = true;

  void validate() const;
};

struct Sample {
  double t = 0.0;          // scaled time w t
  double energy = 0.0;     // total energy
  Vec3 hot_axis_energy;    // per-axis energy of the hot ion
  double min_distance = 0.0;  // closest approach since the previous sample
  double max_radius = 0.0;    // largest ion radius at the sample
};

enum class Outcome { Crystallized, Lost, TimedOut };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

struct Verdict {
  Outcome outcome = Outcome::TimedOut;
  double time = 0.0;  // scaled time; for Crystallized the start of the sustained window
};

struct TrajectoryRecord {
  std::vector<Sample> samples;
  Verdict verdict;
  std::uint64_t seed = 0;
  ScaleSet scales;
  double ground_energy = 0.0;
  std::size_t steps = 0;
  std::size_t rejected_steps = 0;
  SystemState final_state;  // scaled

  double verdict_periods() const;
};

struct ClassifierConfig {
  double ground_energy = 0.0;
  double threshold = 0.1;
  double window = 20.0 * 6.283185307179586;  // scaled time
  double escape_radius = std::numeric_limits<double>::infinity();
};

/// Streaming crystallization / loss detector.
///
/// Crystallized once E_total - E_ground < threshold has held for a full window; the verdict
/// time is the first sample of that window. Lost as soon as any ion exceeds the escape radius.
class CrystallizationMonitor {
 public:
  explicit CrystallizationMonitor(ClassifierConfig config) : config_(config) {}

  std::optional<Verdict> observe(const Sample& s);

 private:
  ClassifierConfig config_;
  std::optional<double> below_since_;
};

/// Batch form of the monitor over a trailing window of samples.
std::optional<Verdict> classify(std::span<const Sample> samples, const ClassifierConfig& config);

/// Called at every sample instant with the scaled state.
using SampleObserver =
    std::function<void(double t, std::span<const Vec3> pos, std::span<const Vec3> vel)>;

/// Integrates the scaled equations of motion from `initial` (scaled units).
///
/// Throws NumericalError on step-size underflow or when two ions come closer than
/// controls.min_distance; the message carries the offending state.
TrajectoryRecord integrate(const IonSystem& system, const SystemState& initial,
                           const IntegrationControls& controls, std::uint64_t seed = 0,
                           const SampleObserver& observer = {});

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record);

}  // namespace sympcool::dynamics
