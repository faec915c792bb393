#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sympcool/vec3.hpp"

namespace sympcool::dynamics {

/// Mass in atomic mass units; only singly charged ions are modelled.
struct IonSpec {
  double mass = 0.0;
  int charge = 1;

  void validate() const;
};

inline IonSpec calcium40() { return {40.0, 1}; }
inline IonSpec aluminium27() { return {27.0, 1}; }

enum class FrequencyScaling {
  StaticPotential,  // m * omega^2 equal for every species on each axis
  Explicit,         // cold-species frequencies given directly
};

struct TrapConfig {
  Vec3 omega_hot;  // rad/s, per axis
  FrequencyScaling scaling = FrequencyScaling::StaticPotential;
  Vec3 omega_cold;  // rad/s, only read when scaling == Explicit
  double gamma = 0.0;  // friction rate on the cold ions, 1/s

  void validate() const;

  /// Per-axis secular frequencies of `ion` given the hot species `hot`.
  Vec3 omega_for(const IonSpec& hot, const IonSpec& ion, bool is_hot) const;
};

/// The near-isotropic trap with slightly incommensurate axes (1.078, 1.0563, 1.0 MHz)
/// and friction gamma = gamma_over_omega_z * omega_z.
TrapConfig default_trap(double gamma_over_omega_z = 0.01);

/// Isotropic trap at `frequency_hz`.
TrapConfig isotropic_trap(double frequency_hz, double gamma = 0.0);

/// Characteristic Coulomb scales of the hot species.
///
/// d is the two-ion equilibrium separation, E_d = m w^2 d^2 / 2 = e^2 / (4 pi eps0 d)
/// the Coulomb energy at that separation and tau = 2 pi / w the trap period.
struct ScaleSet {
  double d = 0.0;       // m
  double energy = 0.0;  // J
  double tau = 0.0;     // s
  double omega = 0.0;   // rad/s, reference frequency used for the scales
};

ScaleSet derive_scales(double hot_mass_u, double omega);
/// Uses the geometric mean of the three axis frequencies.
ScaleSet derive_scales(double hot_mass_u, const Vec3& omega);

/// Ion 0 is the hot ion, ions 1..n are cold.
struct SystemState {
  double time = 0.0;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  std::size_t size() const { return positions.size(); }
  void validate() const;
};

struct Equilibrium {
  std::vector<Vec3> positions;
  double energy = 0.0;
};

/// Static-harmonic-trap Coulomb system in units of the hot species.
///
/// Lengths are in d, times in 1/w, energies in E_d, where w is the reference frequency of
/// `scales()`. In these units the equations of motion read
///
///   r_j'' = -(w_j/w)^2 r_j + 1/(2 mu_j) sum_k (r_j - r_k)/|r_j - r_k|^3 - g v_j,
///
/// with mu_j = m_j/m_h and g = gamma/w applied to the cold ions only. The conserved energy
/// (g = 0) is E = sum_j mu_j (|v_j|^2 + sum_i (w_ji/w)^2 r_ji^2) + sum_{j<k} 1/|r_j - r_k|.
class IonSystem {
 public:
  IonSystem(IonSpec hot, std::vector<IonSpec> cold, TrapConfig trap);

  std::size_t size() const { return mass_ratio_.size(); }
  std::size_t cold_count() const { return size() - 1; }

  const ScaleSet& scales() const { return scales_; }
  const TrapConfig& trap() const { return trap_; }
  const IonSpec& hot() const { return hot_; }
  const std::vector<IonSpec>& cold() const { return cold_; }

  double mass_ratio(std::size_t ion) const { return mass_ratio_[ion]; }
  /// (w_ion,i / w)^2 per axis.
  const Vec3& omega_sq(std::size_t ion) const { return omega_sq_[ion]; }
  /// mu * (w_ion,i / w)^2: the scaled spring constant per axis.
  const Vec3& spring(std::size_t ion) const { return spring_[ion]; }
  double scaled_gamma() const { return gamma_; }

  void accelerations(std::span<const Vec3> pos, std::span<const Vec3> vel,
                     std::span<Vec3> acc) const;
  /// Pairwise Coulomb forces in units of m_h w^2 d.
  void coulomb_forces(std::span<const Vec3> pos, std::span<Vec3> force) const;

  double potential_energy(std::span<const Vec3> pos) const;
  double total_energy(std::span<const Vec3> pos, std::span<const Vec3> vel) const;
  /// mu (v_i^2 + (w_i/w)^2 r_i^2) per axis for a single ion.
  Vec3 axis_energies(std::size_t ion, const Vec3& pos, const Vec3& vel) const;

  /// Minimum-energy configuration of all ions.
  const Equilibrium& ground_state() const;
  /// Minimum-energy configuration of the cold ions alone (hot ion absent).
  const Equilibrium& cold_crystal() const;

  SystemState to_scaled(const SystemState& si) const;
  SystemState to_physical(const SystemState& scaled) const;
  /// SI accelerations (m/s^2) of an SI state.
  std::vector<Vec3> physical_accelerations(const SystemState& si) const;
  /// Total energy of an SI state, J.
  double physical_energy(const SystemState& si) const;

 private:
  IonSpec hot_;
  std::vector<IonSpec> cold_;
  TrapConfig trap_;
  ScaleSet scales_;
  std::vector<double> mass_ratio_;
  std::vector<Vec3> omega_sq_;
  std::vector<Vec3> spring_;
  double gamma_ = 0.0;
  Equilibrium ground_;
  Equilibrium cold_crystal_;
};

double min_distance(std::span<const Vec3> pos);
double max_radius(std::span<const Vec3> pos);

/// Minimum of sum_j sum_i k_ji r_ji^2 + sum_{j<k} 1/|r_j - r_k| over all configurations,
/// found by quasi-Newton descent from several deterministic starting configurations.
Equilibrium find_equilibrium(std::span<const Vec3> springs);

}  // namespace sympcool::dynamics
