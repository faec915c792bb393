#pragma once

#include <numbers>

// CODATA 2018 exact / recommended values, SI units.
namespace sympcool::constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kElementaryCharge = 1.602176634e-19;       // C
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;    // F/m
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;       // kg
inline constexpr double kPlanck = 6.62607015e-34;                  // J s
inline constexpr double kHbar = kPlanck / (2.0 * kPi);             // J s
inline constexpr double kBoltzmann = 1.380649e-23;                 // J/K
inline constexpr double kElectronVolt = kElementaryCharge;         // J

/// e^2 / (4 pi eps0), J m.
inline constexpr double kCoulomb =
    kElementaryCharge * kElementaryCharge / (4.0 * kPi * kVacuumPermittivity);

inline constexpr double kCalciumMass = 40.0;   // u
inline constexpr double kAluminiumMass = 27.0; // u

}  // namespace sympcool::constants
