#pragma once

#include <cstddef>

namespace sympcool::readout {

/// Laguerre polynomial L_n(x) by the three-term upward recurrence.
double laguerre(std::size_t n, double x);

/// exp(-|x|) I_0(x): power series below 30, asymptotic expansion above.
double bessel_i0_scaled(double x);

/// Carrier coupling of Fock state n relative to the ground state, L_n(eta^2).
double carrier_rabi(std::size_t n, double eta);

struct ThermalMotionalState {
  double nbar = 0.0;
  double eta = 0.0;

  double z() const { return nbar / (nbar + 1.0); }
  void validate() const;
};

enum class MeanSquareForm {
  Exact,      // exp(-2 eta^2 nbar) I0(2 eta^2 sqrt(nbar (nbar + 1)))
  Approx,     // exp(-2 eta^2 nbar) I0(2 eta^2 nbar)
  DirectSum,  // (1 - z) sum_n z^n L_n(eta^2)^2, truncated by a tail bound
};

/// Thermal average of the squared carrier coupling, in units of the ground-state value.
double thermal_mean_sq_rabi(const ThermalMotionalState& state, MeanSquareForm form = MeanSquareForm::Exact);

/// sin^2((pi/2) sqrt(<Omega^2>)) for a pulse that is a pi pulse on the ground state.
double pi_pulse_excitation(const ThermalMotionalState& state, MeanSquareForm form = MeanSquareForm::Exact);

/// Thermal average of sin^2((pi/2) L_n(eta^2)) by truncated summation.
double pi_pulse_excitation_exact(const ThermalMotionalState& state);

struct InversionBracket {
  double lo = 0.0;
  double hi = 1e4;
};

struct InversionResult {
  double nbar = 0.0;
  bool saturated = false;  // p below the excitation reached at bracket.hi
};

/// Mean phonon number whose pi-pulse excitation equals p, by bisection to 1e-3 in nbar.
///
/// The excitation decreases monotonically with nbar across the bracket; probabilities
/// below p(bracket.hi) cannot be inverted and are reported as saturated with nbar = hi.
InversionResult invert_excitation(double p, double eta, InversionBracket bracket = {},
                                  MeanSquareForm form = MeanSquareForm::Exact);

/// Largest nbar in [0, limit] up to which the excitation decreases monotonically on a grid
/// of `steps` points.
double monotone_limit(double eta, double limit, std::size_t steps = 2000,
                      MeanSquareForm form = MeanSquareForm::Exact);

}  // namespace sympcool::readout
