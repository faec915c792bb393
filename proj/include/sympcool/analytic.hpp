#pragma once

#include <cstddef>
#include <vector>

#include "sympcool/dynamics.hpp"

namespace sympcool::models {

/// Parameters of the weak-interaction cooling models: hot and cold masses (u), the common
/// trap frequency (rad/s) and the initial hot-ion energy (J).
struct AnalyticModelParams {
  double hot_mass = 0.0;
  double cold_mass = 0.0;
  double omega = 0.0;
  double initial_energy = 0.0;
  dynamics::ScaleSet scales;

  static AnalyticModelParams from_si(double hot_mass, double cold_mass, double omega, double initial_energy_j);
  static AnalyticModelParams from_scaled(double hot_mass, double cold_mass, double omega, double e0_over_ed);

  double e0_over_ed() const { return initial_energy / scales.energy; }
  /// Requires positive masses and frequency and E0 > E_d.
  void validate() const;
};

enum class CurveModel { Simple, Refined };

struct CurvePoint {
  double t = 0.0;  // s
  double energy = 0.0;  // J
};

struct CoolingCurve {
  std::vector<CurvePoint> points;
  CurveModel model = CurveModel::Simple;
};

/// Momentum transferred in a small-angle Coulomb collision at impact parameter b (m) and
/// speed v (m/s): dp = (e^2 / 4 pi eps0) 2 / (b v).
double momentum_kick(double impact_parameter, double speed);
/// Same transfer expressed through the angular momentum L = m b v of the passing ion.
double momentum_kick_from_angular_momentum(double angular_momentum, double mass_u);

/// dE/dt = -(w / 2 pi) (E_d^3 / E^2) (8 m_h / m_c), J/s. Throws OutOfRegime for E <= E_d.
double simple_energy_loss_rate(double energy, const AnalyticModelParams& p);
/// Order-of-magnitude phonon gain rate 4 E_d^3 / (3 h E^2), 1/s.
double phonon_rate_estimate(double energy, const dynamics::ScaleSet& scales);
/// Phonons per second deposited in one readout mode of frequency `readout_omega` when the
/// simple-model loss rate is split evenly over three axes.
double phonon_gain_rate(double energy, const AnalyticModelParams& p, double readout_omega);

/// E(t) = (E0^3 - (t/tau) (24 m_h/m_c) E_d^3)^(1/3), clamped at zero past the cooling time.
double simple_energy_at(double t, const AnalyticModelParams& p);
/// tau_cool = (m_c / 24 m_h) (E0/E_d)^3 tau.
double simple_cooling_time(const AnalyticModelParams& p);
/// Curve from E0 down to E_d, sampled uniformly in time.
CoolingCurve simple_cooling_curve(const AnalyticModelParams& p, std::size_t points = 256);

/// Lower validity limit 2^(1/3) E_d of the log-corrected model.
double refined_energy_cutoff(const AnalyticModelParams& p);
/// -(w/2 pi)(12 m_h/m_c)(E_d^3/E^2) log(E / (2^(1/3) E_d)). Throws OutOfRegime at or below the cutoff.
double refined_cooling_rate(double energy, const AnalyticModelParams& p);
/// Time from E0 to 1.01 times the cutoff, by adaptive quadrature of dE / rate.
double refined_cooling_time(const AnalyticModelParams& p, double rel_tol = 1e-10);
/// Curve sampled on a geometric energy grid from E0 down to 1.01 times the cutoff.
CoolingCurve refined_cooling_curve(const AnalyticModelParams& p, std::size_t points = 256);

enum class ExchangeForm {
  SmallShift,     // dw = (w/2) <d^3 / r^3>
  MeanField,      // dw = w - sqrt(w^2 - (e^2 / 2 pi eps0 m) <1/r^3>)
  OrbitAveraged,  // small-shift form with <1/r^3> averaged over an elliptical relative orbit
};

/// Relative-coordinate amplitude r = sqrt(E / (m w^2)) of an equal-mass pair, m.
double exchange_amplitude(double energy, const AnalyticModelParams& p);
/// <1/r^3> over a harmonic orbit with semi-axes r and aspect * r, in units of 1/r^3.
double orbit_inverse_cube_average(double aspect);
/// Energy-exchange angular frequency of an equal-mass pair at relative distance r (m).
double exchange_frequency(double distance, const AnalyticModelParams& p, ExchangeForm form = ExchangeForm::SmallShift,
                          double aspect = 1.0);
double exchange_frequency_at_energy(double energy, const AnalyticModelParams& p,
                                    ExchangeForm form = ExchangeForm::SmallShift, double aspect = 1.0);
/// tau_ex = (tau / sqrt 8) (E0/E_d)^(3/2) = pi / dw at r(E0).
double exchange_time(const AnalyticModelParams& p);

/// The same models in units of (E_d, tau). Rates are in E_d per period; times in periods.
namespace scaled {
double simple_energy_loss_rate(double e_over_ed, double hot_mass, double cold_mass);
double simple_cooling_time(double e0_over_ed, double hot_mass, double cold_mass);
double simple_energy_at(double t_periods, double e0_over_ed, double hot_mass, double cold_mass);
double refined_cooling_rate(double e_over_ed, double hot_mass, double cold_mass);
double refined_cooling_time(double e0_over_ed, double hot_mass, double cold_mass, double rel_tol = 1e-10);
/// Exchange time in periods for the relative amplitude implied by E0.
double exchange_time(double e0_over_ed);
/// dw / w at relative distance r / d.
double exchange_frequency(double r_over_d, ExchangeForm form = ExchangeForm::SmallShift, double aspect = 1.0);
}  // namespace scaled

}  // namespace sympcool::models
