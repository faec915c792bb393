#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "sympcool/analytic.hpp"
#include "sympcool/readout.hpp"
#include "sympcool/trajectory.hpp"

namespace sympcool::readout {

/// How the excitation probability of a thermal state is evaluated, both when drawing
/// synthetic outcomes and when inverting measured probabilities.
enum class ExcitationModel {
  RmsCoupling,     // sin^2 of the rms carrier coupling (closed form)
  ThermalAverage,  // thermal average of sin^2 over Fock states (truncated sum)
};

struct DetectionProtocol {
  double cool_ms = 5.0;
  double wait_ms = 10.0;
  double detect_ms = 5.0;
  double cycles_per_s = 50.0;
  double eta = 0.03;
  double doppler_nbar = 10.0;                         // reset value after each cooling step
  double readout_omega = 2.0 * 3.141592653589793 * 2e6;  // rad/s
  double ambient_rate = 0.0;                          // phonons/s
  bool interleave_control = false;                    // every second cycle without waiting time
  ExcitationModel model = ExcitationModel::RmsCoupling;
  double nbar_ceiling = 1e5;                          // upper end of the inversion bracket

  double period() const { return 1.0 / cycles_per_s; }
  double wait() const { return 1e-3 * wait_ms; }
  void validate() const;
};

struct DetectionCycleRecord {
  double t = 0.0;     // cycle start, s
  double wait = 0.0;  // s
  bool outcome = false;
  bool control = false;
};

/// Remaining hot-ion energy (J) as a function of time (s). Heating of the readout ion in
/// a waiting window [t, t + w] is E(t) - E(t + w); flat stretches transfer nothing.
struct EnergyProfile {
  std::function<double(double)> energy;
  double t_end = 0.0;  // time after which the profile is flat
};

/// Simple-model curve switched on at `load_time`. If `lost_after` is set the ion leaves the
/// trap that long after loading and its energy stops flowing into the readout ion.
EnergyProfile profile_from_model(const models::AnalyticModelParams& p, double load_time,
                                 std::optional<double> lost_after = std::nullopt);
/// Piecewise-linear interpolation of a sampled curve shifted to start at `load_time`.
EnergyProfile profile_from_curve(const models::CoolingCurve& curve, double load_time);
/// Excess energy E_total - E_ground of a simulated trajectory, converted to SI.
EnergyProfile profile_from_trajectory(const dynamics::TrajectoryRecord& record, double load_time);

double excitation_probability(double nbar, const DetectionProtocol& protocol);

/// Mean phonon number left in the readout mode after the waiting time of a cycle starting at t.
double cycle_nbar(const EnergyProfile& profile, const DetectionProtocol& protocol, double t, double wait);

/// Draws `cycles` consecutive detection cycles starting at t = 0.
std::vector<DetectionCycleRecord> synthesize_signal(const EnergyProfile& profile, const DetectionProtocol& protocol,
                                                    std::size_t cycles, std::mt19937_64& rng);

struct EnergyEstimate {
  double t = 0.0;  // bin centre, s
  std::size_t cycles = 0;
  double p_hat = 0.0;
  double p_lo = 0.0;
  double p_hi = 0.0;
  double p_control = -1.0;  // excitation of interleaved control cycles, -1 without any
  double nbar = 0.0;        // heating in the waiting time, above the Doppler floor
  double nbar_lo = 0.0;
  double nbar_hi = 0.0;
  bool saturated = false;
  double energy = 0.0;      // J transferred during the bin
  double E_excess = 0.0;    // J still to be dissipated from this bin on
  double E_lo = 0.0;
  double E_hi = 0.0;
};

struct EnergyAnalysis {
  std::vector<EnergyEstimate> bins;
  std::size_t saturated_bins = 0;
  double energy_floor = 0.0;  // lower bound on the energy hidden in saturated bins, J

  double total_energy() const { return bins.empty() ? 0.0 : bins.front().E_excess; }
};

/// Bins the waiting-time cycles in groups of `bin` (>= 50), inverts each binned probability
/// to a heating rate and integrates it backwards in time. Confidence bands come from the
/// Wilson score interval mapped through the inversion.
EnergyAnalysis estimate_energy(const std::vector<DetectionCycleRecord>& cycles, std::size_t bin,
                               const DetectionProtocol& protocol, double z_score = 1.96);

void write_cycles_csv(std::ostream& os, const std::vector<DetectionCycleRecord>& cycles);
std::vector<DetectionCycleRecord> read_cycles_csv(std::istream& is);
void write_estimates_csv(std::ostream& os, const EnergyAnalysis& analysis);

}  // namespace sympcool::readout
