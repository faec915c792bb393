#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sympcool/trajectory.hpp"

namespace sympcool::ensemble {

/// splitmix64 finaliser; also used to derive independent per-trial seeds.
std::uint64_t splitmix64(std::uint64_t x);
/// Seed of trial `trial` at grid point `point`, a pure function of its arguments.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t point, std::size_t trial);

/// Thermal initial condition with E(0) = 3 k_B T for the hot ion (scaled units, energy in
/// E_d). Each hot-ion coordinate is Gaussian with variance theta/(2 (w_i/w)^2), each velocity
/// component with variance theta/2, theta = E0/3. Cold ions start at rest in their own
/// crystal configuration.
dynamics::SystemState sample_initial(const dynamics::IonSystem& system, double e0_over_ed, std::mt19937_64& rng);

/// mu (v^2 + (w_i/w)^2 r^2) of the hot ion summed over axes: the energy that sample_initial draws.
double hot_oscillator_energy(const dynamics::IonSystem& system, const dynamics::SystemState& scaled);

struct EnsembleSpec {
  dynamics::IonSpec hot = dynamics::aluminium27();
  dynamics::IonSpec cold = dynamics::calcium40();
  std::size_t n_cold = 1;
  dynamics::TrapConfig trap = dynamics::default_trap();
  std::vector<double> e0_grid{10.0, 20.0, 40.0, 60.0};
  std::size_t trials_per_point = 40;
  std::uint64_t seed = 1;
  /// Hard limit in trap periods; when <= 0 it is t_max_factor times the simple-model time.
  double t_max_periods = 0.0;
  double t_max_factor = 200.0;
  dynamics::IntegrationControls controls;

  void validate() const;
  double t_max_at(double e0) const;
};

enum class TrialStatus { Pending, Done, Failed };

struct TrialResult {
  std::uint64_t seed = 0;
  TrialStatus status = TrialStatus::Pending;
  dynamics::Outcome outcome = dynamics::Outcome::TimedOut;
  double t_cool_periods = 0.0;  // verdict time; meaningful for Crystallized only
  std::string error;

  bool crystallized() const {
    return status == TrialStatus::Done && outcome == dynamics::Outcome::Crystallized;
  }
  /// "crystallized", "lost", "timed_out", "failed" or "pending".
  std::string verdict() const;
};

struct PointStatistics {
  std::size_t crystallized = 0;
  std::size_t lost = 0;
  std::size_t timed_out = 0;
  std::size_t failed = 0;
  std::size_t pending = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
  double median = 0.0;
  double model_prediction = 0.0;  // simple-model cooling time, periods

  double timed_out_fraction() const;
  double spread() const { return p10 > 0.0 ? p90 / p10 : 0.0; }
};

struct PointResult {
  double e0 = 0.0;
  std::size_t n_cold = 0;
  std::vector<TrialResult> trials;
  PointStatistics stats;
};

struct EnsembleResult {
  std::vector<PointResult> points;
  bool complete() const;
};

/// Linear-interpolation percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> values, double q);
/// Statistics over the crystallized trials; other verdicts are only counted.
PointStatistics summarize(const std::vector<TrialResult>& trials);

struct RunOptions {
  std::size_t workers = 0;  // 0: SYMPCOOL_WORKERS or the hardware concurrency
  const std::atomic<bool>* cancel = nullptr;
  /// Results of an earlier run keyed by (grid index, trial index); reused when the seed matches.
  std::map<std::pair<std::size_t, std::size_t>, TrialResult> previous;
  /// Invoked (serialised) after each newly finished trial.
  std::function<void(std::size_t point, std::size_t trial, const TrialResult&)> on_trial;
};

std::size_t default_workers();

TrialResult run_trial(const dynamics::IonSystem& system, double e0, double t_max_periods,
                      const dynamics::IntegrationControls& controls, std::uint64_t seed);

/// Runs every grid point; trial failures are recorded, never thrown. Trials left over after
/// cancellation stay Pending. The result does not depend on the worker count.
EnsembleResult run_ensemble(const EnsembleSpec& spec, const RunOptions& options = {});

void write_scatter_csv(std::ostream& os, const EnsembleResult& result);
/// Reads a scatter CSV back into (point, trial) results for resuming a run of `spec`.
std::map<std::pair<std::size_t, std::size_t>, TrialResult> read_scatter_csv(std::istream& is,
                                                                             const EnsembleSpec& spec);

struct ExchangeSample {
  double t = 0.0;  // periods
  double hot = 0.0;
  double cold = 0.0;
  double total = 0.0;  // total system energy
};

struct ExchangeProbeResult {
  std::vector<ExchangeSample> series;
  std::size_t axis = 2;
  double axis_energy = 0.0;        // mean of hot + cold energy on the axis
  double period = 0.0;             // envelope period from successive maxima of hot - cold, periods
  std::size_t peaks = 0;
  double exchange_time = 0.0;      // half the envelope period: hot maximum to cold maximum
  double initial_energy = 0.0;     // hot-ion oscillator energy at t = 0, E_d
  double predicted_exchange = 0.0; // pi / dw with r = sqrt(initial_energy / 2) d
  double predicted_axis = 0.0;     // pi / dw with r = sqrt(axis_energy / 2) d
  double energy_drift = 0.0;       // max |E(t) - E(0)| / E(0)
};

/// Frictionless equal-mass pair: per-axis energy exchange between hot and cold ion.
///
/// The hot ion starts from a thermal draw rescaled so that its oscillator energy is exactly
/// e0_over_ed; the draw fixes how that energy is shared among the axes.
ExchangeProbeResult equal_mass_exchange_probe(double e0_over_ed, std::size_t axis, double duration_periods,
                                              std::mt19937_64& rng, dynamics::TrapConfig trap = dynamics::default_trap(0.0),
                                              dynamics::IntegrationControls controls = {});

}  // namespace sympcool::ensemble
