#include "sympcool/readout.hpp"

#include <cmath>
#include <numbers>

#include "sympcool/error.hpp"

namespace sympcool::readout {

namespace {

constexpr double kTailTolerance = 1e-12;

double sin_sq_half_pi(double s) {
  const double v = std::sin(0.5 * std::numbers::pi * s);
  return v * v;
}

// Accumulates (1 - z) sum z^n g(L_n(x)) for 0 <= g <= e^x until the geometric tail bound
// drops below kTailTolerance relative to the running sum.
template <class G>
double thermal_sum(const ThermalMotionalState& s, const G& g) {
  const double x = s.eta * s.eta;
  const double z = s.z();
  const double bound = std::exp(x);
  double l_prev = 1.0;
  double l = 1.0 - x;
  double weight = 1.0 - z;
  double sum = weight * g(1.0);
  double zn = 1.0;
  for (std::size_t n = 1;; ++n) {
    zn *= z;
    if (zn * bound <= kTailTolerance * sum || zn == 0.0) break;
    sum += weight * zn * g(l);
    const double next = ((2.0 * n + 1.0 - x) * l - static_cast<double>(n) * l_prev) / (n + 1.0);
    l_prev = l;
    l = next;
  }
  return sum;
}

}  // namespace

double laguerre(std::size_t n, double x) {
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = 1.0 - x;
  for (std::size_t k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0 - x) * cur - static_cast<double>(k) * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double bessel_i0_scaled(double x) {
  x = std::abs(x);
  if (x < 30.0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 500; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return sum * std::exp(-x);
  }
  // exp(-x) I0(x) ~ (2 pi x)^(-1/2) sum_k ((2k-1)!!)^2 / (k! (8x)^k)
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= odd * odd / (8.0 * k * x);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

double carrier_rabi(std::size_t n, double eta) { return laguerre(n, eta * eta); }

void ThermalMotionalState::validate() const {
  if (!std::isfinite(nbar) || nbar < 0.0) throw InvalidArgument("mean phonon number must be >= 0");
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("Lamb-Dicke parameter must lie in (0, 1)");
}

double thermal_mean_sq_rabi(const ThermalMotionalState& state, MeanSquareForm form) {
  state.validate();
  const double a = 2.0 * state.eta * state.eta * state.nbar;
  switch (form) {
    case MeanSquareForm::Exact: {
      const double y = 2.0 * state.eta * state.eta * std::sqrt(state.nbar * (state.nbar + 1.0));
      return std::exp(y - a) * bessel_i0_scaled(y);
    }
    case MeanSquareForm::Approx:
      return bessel_i0_scaled(a);
    case MeanSquareForm::DirectSum:
      return thermal_sum(state, [](double l) { return l * l; });
  }
  throw InvalidArgument("unknown mean-square form");
}

double pi_pulse_excitation(const ThermalMotionalState& state, MeanSquareForm form) {
  return sin_sq_half_pi(std::sqrt(thermal_mean_sq_rabi(state, form)));
}

double pi_pulse_excitation_exact(const ThermalMotionalState& state) {
  state.validate();
  return thermal_sum(state, [](double l) { return sin_sq_half_pi(l); });
}

InversionResult invert_excitation(double p, double eta, InversionBracket bracket, MeanSquareForm form) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("excitation probability must lie in [0, 1]");
  if (!(bracket.lo >= 0.0 && bracket.hi > bracket.lo)) throw InvalidArgument("invalid inversion bracket");
  const auto excitation = [&](double nbar) { return pi_pulse_excitation({nbar, eta}, form); };

  if (p >= excitation(bracket.lo)) return {bracket.lo, false};
  if (p < excitation(bracket.hi)) return {bracket.hi, true};

  double lo = bracket.lo;
  double hi = bracket.hi;
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    if (excitation(mid) > p)
      lo = mid;
    else
      hi = mid;
  }
  return {0.5 * (lo + hi), false};
}

double monotone_limit(double eta, double limit, std::size_t steps, MeanSquareForm form) {
  if (!(limit > 0.0) || steps < 2) throw InvalidArgument("invalid monotonicity scan");
  double prev = pi_pulse_excitation({0.0, eta}, form);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double nbar = limit * static_cast<double>(k) / static_cast<double>(steps);
    const double p = pi_pulse_excitation({nbar, eta}, form);
    if (!(p < prev)) return limit * static_cast<double>(k - 1) / static_cast<double>(steps);
    prev = p;
  }
  return limit;
}

}  // namespace sympcool::readout
