#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <vector>

namespace sympcool::velocimetry {

/// Target-to-trap flight distance and probe geometry. `angle_deg` is the angle between the
/// atomic beam and the probe beam; 90 degrees means no first-order Doppler shift.
struct BeamGeometry {
  double d_target = 0.026;     // m
  double angle_deg = 87.7;
  double wavelength = 394e-9;  // m

  void validate() const;
};

/// Photon arrival times after the ablation trigger for one probe detuning. Times before
/// zero are background. `window_start` < 0 and `window_end` bound the recording.
struct PhotonRecord {
  double detuning = 0.0;  // Hz
  std::vector<double> arrivals;  // s, sorted
  double window_start = 0.0;
  double window_end = 0.0;

  void validate() const;
  double pre_trigger() const { return -window_start; }
};

double arrival_to_velocity(double tau, const BeamGeometry& geom);
double velocity_to_arrival(double v, const BeamGeometry& geom);

/// Probe detuning (Hz) at which an atom of speed v is resonant with a line at `line_offset`.
double doppler_resonance(double v, const BeamGeometry& geom, double line_offset = 0.0);

enum class TransitionMode {
  OpenTransition,    // about one photon per atom: every photon counts once
  ClosedTransition,  // photon yield per atom ~ 1/v: every photon weighted by v
};

enum class Weighting { PerPhoton, FluxCorrected };

struct AnalysisOptions {
  double prompt_mask = 500e-9;  // s; arrivals in [0, prompt_mask) are discarded
  double v_min = 200.0;         // m/s
  double v_max = 2e4;
  std::size_t bins = 100;       // log-spaced in v

  void validate() const;
};

struct BackgroundEstimate {
  double rate = 0.0;  // counts/s summed over records
  std::size_t counts = 0;
  double duration = 0.0;  // pre-trigger time summed over records, s
};

/// Pre-trigger count rate. Throws InvalidArgument when no record has pre-trigger time.
BackgroundEstimate estimate_background(const std::vector<PhotonRecord>& records);

/// Background-corrected histogram over arbitrary arrival-time bins.
///
/// entries = raw - background, with negative entries clipped to zero. `clip_mass` is the
/// (non-positive) sum of the clipped residuals, so sum(entries) = raw_total - background_total
/// - clip_mass exactly.
struct CorrectedHistogram {
  std::vector<double> edges;  // s for time histograms, m/s for velocity histograms
  std::vector<double> raw;
  std::vector<double> background;
  std::vector<double> entries;
  double raw_total = 0.0;
  double background_total = 0.0;
  double clip_mass = 0.0;
  double background_rate = 0.0;
  double prompt_mask = 0.0;

  double total() const;
};

/// Arrival-time histogram on `edges` (s, increasing, starting at or after zero) with the
/// pre-trigger background subtracted.
CorrectedHistogram subtract_background(const std::vector<PhotonRecord>& records, const std::vector<double>& edges,
                                       double prompt_mask = 500e-9);

struct VelocityHistogram {
  CorrectedHistogram hist;  // edges in m/s
  Weighting weighting = Weighting::PerPhoton;

  /// entries / bin width.
  std::vector<double> density() const;
  std::vector<double> centres() const;
};

std::vector<double> log_edges(double lo, double hi, std::size_t bins);

VelocityHistogram velocity_distribution(const std::vector<PhotonRecord>& records, const BeamGeometry& geom,
                                        TransitionMode mode, const AnalysisOptions& options = {});

/// Velocity of the density maximum after 3-point smoothing, refined by a parabola in log v.
double peak_velocity(const VelocityHistogram& h);

struct CaptureWindow {
  std::vector<PhotonRecord> records;
  double v_min = 0.0;  // d / (tau_delay + tau_gate)
  double v_max = std::numeric_limits<double>::infinity();  // d / tau_delay
};

/// Keeps arrivals in [tau_delay, tau_delay + tau_gate]; background outside stays untouched.
CaptureWindow capture_window_filter(const std::vector<PhotonRecord>& records, const BeamGeometry& geom,
                                    double tau_delay, double tau_gate);

/// Photons whose arrival time puts the atom on resonance with `line_offset` at the record's
/// detuning, within `tolerance` Hz.
std::vector<PhotonRecord> select_line(const std::vector<PhotonRecord>& records, const BeamGeometry& geom,
                                      double line_offset, double tolerance);

/// Flux-form plume: atoms per unit speed ~ v^3 exp(-(v - u)^2 / (2 s^2)), parametrised by the
/// modal speed and the spread s.
struct PlumeModel {
  double mode_velocity = 4500.0;  // m/s
  double spread = 1350.0;         // m/s
  TransitionMode transition = TransitionMode::OpenTransition;

  void validate() const;
  double drift() const;  // u
  /// Atom flux density (unnormalised).
  double flux(double v) const;
  /// Photon density per unit speed (unnormalised): flux for open, flux / v for closed lines.
  double photon_density(double v) const;
};

struct GeneratorConfig {
  PlumeModel plume;
  BeamGeometry geom;
  std::size_t photons = 1000000;
  double background_rate = 2.5e8;  // counts/s per record, accumulated over all shots
  double window_start = -200e-6;
  double window_end = 200e-6;
  std::vector<double> detunings{0.0};
  std::size_t prompt_photons = 0;  // extra photons uniformly inside the prompt burst
  double prompt_width = 500e-9;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Signal photons are split evenly across detunings; background is Poisson per record.
std::vector<PhotonRecord> generate_plume(const GeneratorConfig& config);

void write_photons_csv(std::ostream& os, const std::vector<PhotonRecord>& records);
/// Groups rows by detuning. Window bounds come from the arguments when finite, otherwise from
/// the earliest and latest arrival of each group.
std::vector<PhotonRecord> read_photons_csv(std::istream& is,
                                           double window_start = std::numeric_limits<double>::quiet_NaN(),
                                           double window_end = std::numeric_limits<double>::quiet_NaN());
void write_histogram_csv(std::ostream& os, const VelocityHistogram& h);

}  // namespace sympcool::velocimetry
