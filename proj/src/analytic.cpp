#include "sympcool/analytic.hpp"

#include <cmath>

#include "sympcool/constants.hpp"
#include "sympcool/error.hpp"
#include "sympcool/quadrature.hpp"

namespace sympcool::models {

namespace {

using constants::kPi;

const double kCbrt2 = std::cbrt(2.0);
constexpr double kRefinedMargin = 1.01;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

void require_equal_masses(const AnalyticModelParams& p) {
  if (std::abs(p.hot_mass - p.cold_mass) > 1e-12 * p.hot_mass)
    throw InvalidArgument("exchange model requires equal masses");
}

// Integral of E^2 / log(E/c) dE from lo to hi using E = c exp(u).
double refined_time_integral(double lo_over_c, double hi_over_c, double abs_tol) {
  const auto f = [](double u) { return std::exp(3.0 * u) / u; };
  return integrate_adaptive(f, std::log(lo_over_c), std::log(hi_over_c), abs_tol, 32);
}

}  // namespace

AnalyticModelParams AnalyticModelParams::from_si(double hot_mass, double cold_mass, double omega,
                                                 double initial_energy_j) {
  AnalyticModelParams p;
  p.hot_mass = hot_mass;
  p.cold_mass = cold_mass;
  p.omega = omega;
  p.initial_energy = initial_energy_j;
  p.scales = dynamics::derive_scales(hot_mass, omega);
  p.validate();
  return p;
}

AnalyticModelParams AnalyticModelParams::from_scaled(double hot_mass, double cold_mass, double omega,
                                                     double e0_over_ed) {
  const auto scales = dynamics::derive_scales(hot_mass, omega);
  return from_si(hot_mass, cold_mass, omega, e0_over_ed * scales.energy);
}

void AnalyticModelParams::validate() const {
  if (!positive_finite(hot_mass) || !positive_finite(cold_mass))
    throw InvalidArgument("model masses must be positive");
  if (!positive_finite(omega)) throw InvalidArgument("model frequency must be positive");
  if (!positive_finite(initial_energy)) throw InvalidArgument("initial energy must be positive");
  if (!(initial_energy > scales.energy))
    throw OutOfRegime("initial energy must exceed E_d (weak-interaction regime)");
}

double momentum_kick(double impact_parameter, double speed) {
  if (!positive_finite(impact_parameter) || !positive_finite(speed))
    throw InvalidArgument("impact parameter and speed must be positive");
  return constants::kCoulomb * 2.0 / (impact_parameter * speed);
}

double momentum_kick_from_angular_momentum(double angular_momentum, double mass_u) {
  if (!positive_finite(angular_momentum) || !positive_finite(mass_u))
    throw InvalidArgument("angular momentum and mass must be positive");
  return constants::kCoulomb * 2.0 * mass_u * constants::kAtomicMassUnit / angular_momentum;
}

double simple_energy_loss_rate(double energy, const AnalyticModelParams& p) {
  const double ed = p.scales.energy;
  if (!(energy > ed)) throw OutOfRegime("simple model requires E > E_d");
  return -(p.omega / (2.0 * kPi)) * (ed * ed * ed / (energy * energy)) * (8.0 * p.hot_mass / p.cold_mass);
}

double phonon_rate_estimate(double energy, const dynamics::ScaleSet& scales) {
  if (!positive_finite(energy)) throw InvalidArgument("energy must be positive");
  const double ed = scales.energy;
  return 4.0 * ed * ed * ed / (3.0 * constants::kPlanck * energy * energy);
}

double phonon_gain_rate(double energy, const AnalyticModelParams& p, double readout_omega) {
  if (!positive_finite(readout_omega)) throw InvalidArgument("readout frequency must be positive");
  return -simple_energy_loss_rate(energy, p) / (3.0 * constants::kHbar * readout_omega);
}

double simple_energy_at(double t, const AnalyticModelParams& p) {
  const double ed = p.scales.energy;
  const double e0 = p.initial_energy;
  const double cube = e0 * e0 * e0 - (t / p.scales.tau) * (24.0 * p.hot_mass / p.cold_mass) * ed * ed * ed;
  return cube > 0.0 ? std::cbrt(cube) : 0.0;
}

double simple_cooling_time(const AnalyticModelParams& p) {
  const double x = p.e0_over_ed();
  return (p.cold_mass / (24.0 * p.hot_mass)) * x * x * x * p.scales.tau;
}

CoolingCurve simple_cooling_curve(const AnalyticModelParams& p, std::size_t points) {
  if (points < 2) throw InvalidArgument("curve needs at least two points");
  p.validate();
  const double ratio = 1.0 / p.e0_over_ed();
  const double t_end = simple_cooling_time(p) * (1.0 - ratio * ratio * ratio);
  CoolingCurve curve;
  curve.model = CurveModel::Simple;
  for (std::size_t k = 0; k < points; ++k) {
    const double t = t_end * static_cast<double>(k) / static_cast<double>(points - 1);
    curve.points.push_back({t, k + 1 == points ? p.scales.energy : simple_energy_at(t, p)});
  }
  return curve;
}

double refined_energy_cutoff(const AnalyticModelParams& p) { return kCbrt2 * p.scales.energy; }

double refined_cooling_rate(double energy, const AnalyticModelParams& p) {
  const double ed = p.scales.energy;
  const double cutoff = refined_energy_cutoff(p);
  if (!(energy > cutoff)) throw OutOfRegime("refined model requires E > 2^(1/3) E_d");
  return -(p.omega / (2.0 * kPi)) * (12.0 * p.hot_mass / p.cold_mass) * (ed * ed * ed / (energy * energy)) *
         std::log(energy / cutoff);
}

double refined_cooling_time(const AnalyticModelParams& p, double rel_tol) {
  const double c = refined_energy_cutoff(p);
  const double e0 = p.initial_energy;
  if (!(e0 > c)) throw OutOfRegime("refined model requires E0 > 2^(1/3) E_d");
  if (e0 <= kRefinedMargin * c) return 0.0;
  const double ed = p.scales.energy;
  // dt = E^2 dE / (K log(E/c)) with K = (w/2pi)(12 m_h/m_c) E_d^3.
  const double k = (p.omega / (2.0 * kPi)) * (12.0 * p.hot_mass / p.cold_mass) * ed * ed * ed;
  const double x0 = e0 / c;
  const double scale = x0 * x0 * x0;
  const double integral = refined_time_integral(kRefinedMargin, x0, rel_tol * scale);
  return c * c * c * integral / k;
}

CoolingCurve refined_cooling_curve(const AnalyticModelParams& p, std::size_t points) {
  if (points < 2) throw InvalidArgument("curve needs at least two points");
  const double c = refined_energy_cutoff(p);
  const double e0 = p.initial_energy;
  const double e_low = kRefinedMargin * c;
  if (!(e0 > e_low)) throw OutOfRegime("initial energy below the refined-model cutoff");
  const double ed = p.scales.energy;
  const double k = (p.omega / (2.0 * kPi)) * (12.0 * p.hot_mass / p.cold_mass) * ed * ed * ed;

  CoolingCurve curve;
  curve.model = CurveModel::Refined;
  curve.points.push_back({0.0, e0});
  double t = 0.0;
  double e_prev = e0;
  for (std::size_t j = 1; j < points; ++j) {
    const double frac = static_cast<double>(j) / static_cast<double>(points - 1);
    const double e = j + 1 == points ? e_low : e0 * std::pow(e_low / e0, frac);
    const double hi = e_prev / c;
    t += c * c * c * refined_time_integral(e / c, hi, 1e-12 * hi * hi * hi) / k;
    curve.points.push_back({t, e});
    e_prev = e;
  }
  return curve;
}

double exchange_amplitude(double energy, const AnalyticModelParams& p) {
  if (!positive_finite(energy)) throw InvalidArgument("energy must be positive");
  const double m = p.hot_mass * constants::kAtomicMassUnit;
  return std::sqrt(energy / (m * p.omega * p.omega));
}

double orbit_inverse_cube_average(double aspect) {
  if (!(aspect > 0.0 && aspect <= 1.0)) throw InvalidArgument("orbit aspect ratio must lie in (0, 1]");
  const double q2 = aspect * aspect;
  const auto f = [q2](double s) {
    const double c = std::cos(s);
    const double sn = std::sin(s);
    const double r2 = c * c + q2 * sn * sn;
    return 1.0 / (r2 * std::sqrt(r2));
  };
  return integrate_adaptive(f, 0.0, 0.5 * kPi, 1e-12 / (q2 * aspect), 64) / (0.5 * kPi);
}

double exchange_frequency(double distance, const AnalyticModelParams& p, ExchangeForm form, double aspect) {
  require_equal_masses(p);
  if (!positive_finite(distance)) throw InvalidArgument("distance must be positive");
  const double m = p.hot_mass * constants::kAtomicMassUnit;
  const double w = p.omega;
  double inv_cube = 1.0 / (distance * distance * distance);
  switch (form) {
    case ExchangeForm::SmallShift:
      return constants::kCoulomb * inv_cube / (m * w);
    case ExchangeForm::OrbitAveraged:
      return constants::kCoulomb * inv_cube * orbit_inverse_cube_average(aspect) / (m * w);
    case ExchangeForm::MeanField: {
      const double arg = w * w - 2.0 * constants::kCoulomb * inv_cube / m;
      if (!(arg > 0.0)) throw OutOfRegime("ions too close for the mean-field exchange frequency");
      return w - std::sqrt(arg);
    }
  }
  throw InvalidArgument("unknown exchange form");
}

double exchange_frequency_at_energy(double energy, const AnalyticModelParams& p, ExchangeForm form,
                                    double aspect) {
  return exchange_frequency(exchange_amplitude(energy, p), p, form, aspect);
}

double exchange_time(const AnalyticModelParams& p) {
  require_equal_masses(p);
  return p.scales.tau / std::sqrt(8.0) * std::pow(p.e0_over_ed(), 1.5);
}

namespace scaled {

double simple_energy_loss_rate(double e, double hot_mass, double cold_mass) {
  if (!(e > 1.0)) throw OutOfRegime("simple model requires E > E_d");
  return -8.0 * (hot_mass / cold_mass) / (e * e);
}

double simple_cooling_time(double e0, double hot_mass, double cold_mass) {
  return cold_mass / (24.0 * hot_mass) * e0 * e0 * e0;
}

double simple_energy_at(double t, double e0, double hot_mass, double cold_mass) {
  const double cube = e0 * e0 * e0 - t * 24.0 * hot_mass / cold_mass;
  return cube > 0.0 ? std::cbrt(cube) : 0.0;
}

double refined_cooling_rate(double e, double hot_mass, double cold_mass) {
  if (!(e > kCbrt2)) throw OutOfRegime("refined model requires E > 2^(1/3) E_d");
  return -12.0 * (hot_mass / cold_mass) * std::log(e / kCbrt2) / (e * e);
}

double refined_cooling_time(double e0, double hot_mass, double cold_mass, double rel_tol) {
  if (!(e0 > kCbrt2)) throw OutOfRegime("refined model requires E0 > 2^(1/3) E_d");
  if (e0 <= kRefinedMargin * kCbrt2) return 0.0;
  const double x0 = e0 / kCbrt2;
  const double integral = refined_time_integral(kRefinedMargin, x0, rel_tol * x0 * x0 * x0);
  return 2.0 * integral / (12.0 * hot_mass / cold_mass);
}

double exchange_time(double e0) { return std::pow(e0, 1.5) / std::sqrt(8.0); }

double exchange_frequency(double r, ExchangeForm form, double aspect) {
  if (!positive_finite(r)) throw InvalidArgument("distance must be positive");
  const double x = 1.0 / (r * r * r);
  switch (form) {
    case ExchangeForm::SmallShift: return 0.5 * x;
    case ExchangeForm::OrbitAveraged: return 0.5 * x * orbit_inverse_cube_average(aspect);
    case ExchangeForm::MeanField:
      if (!(x < 1.0)) throw OutOfRegime("ions too close for the mean-field exchange frequency");
      return 1.0 - std::sqrt(1.0 - x);
  }
  throw InvalidArgument("unknown exchange form");
}

}  // namespace scaled

}  // namespace sympcool::models
