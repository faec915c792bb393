#include "sympcool/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "sympcool/constants.hpp"
#include "sympcool/error.hpp"

namespace sympcool::dynamics {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

bool all_positive(const Vec3& v) {
  return positive_finite(v[0]) && positive_finite(v[1]) && positive_finite(v[2]);
}

}  // namespace

void IonSpec::validate() const {
  if (!positive_finite(mass)) throw InvalidArgument("ion mass must be positive");
  if (charge != 1) throw InvalidArgument("only singly charged ions are supported");
}

void TrapConfig::validate() const {
  if (!all_positive(omega_hot)) throw InvalidArgument("trap frequencies must be positive");
  if (scaling == FrequencyScaling::Explicit && !all_positive(omega_cold))
    throw InvalidArgument("explicit cold-ion frequencies must be positive");
  if (!std::isfinite(gamma) || gamma < 0.0) throw InvalidArgument("friction rate must be >= 0");
}

Vec3 TrapConfig::omega_for(const IonSpec& hot, const IonSpec& ion, bool is_hot) const {
  if (is_hot) return omega_hot;
  if (scaling == FrequencyScaling::Explicit) return omega_cold;
  return omega_hot * std::sqrt(hot.mass / ion.mass);
}

TrapConfig default_trap(double gamma_over_omega_z) {
  const double two_pi = 2.0 * constants::kPi;
  TrapConfig trap;
  trap.omega_hot = Vec3{two_pi * 1.078e6, two_pi * 1.0563e6, two_pi * 1.0e6};
  trap.gamma = gamma_over_omega_z * trap.omega_hot[2];
  return trap;
}

TrapConfig isotropic_trap(double frequency_hz, double gamma) {
  const double w = 2.0 * constants::kPi * frequency_hz;
  TrapConfig trap;
  trap.omega_hot = Vec3{w, w, w};
  trap.gamma = gamma;
  return trap;
}

ScaleSet derive_scales(double hot_mass_u, double omega) {
  if (!positive_finite(hot_mass_u) || !positive_finite(omega))
    throw InvalidArgument("derive_scales: mass and frequency must be positive");
  const double m = hot_mass_u * constants::kAtomicMassUnit;
  ScaleSet s;
  s.omega = omega;
  s.d = std::cbrt(2.0 * constants::kCoulomb / (m * omega * omega));
  s.energy = constants::kCoulomb / s.d;
  s.tau = 2.0 * constants::kPi / omega;
  return s;
}

ScaleSet derive_scales(double hot_mass_u, const Vec3& omega) {
  if (!all_positive(omega)) throw InvalidArgument("derive_scales: frequencies must be positive");
  return derive_scales(hot_mass_u, std::cbrt(omega[0] * omega[1] * omega[2]));
}

void SystemState::validate() const {
  if (positions.empty() || positions.size() != velocities.size())
    throw InvalidArgument("state needs matching, non-empty position and velocity lists");
  for (std::size_t j = 0; j < positions.size(); ++j)
    for (std::size_t i = 0; i < 3; ++i)
      if (!std::isfinite(positions[j][i]) || !std::isfinite(velocities[j][i]))
        throw InvalidArgument("state has non-finite components");
  if (min_distance(positions) <= 0.0) throw InvalidArgument("state has coincident ions");
}

double min_distance(std::span<const Vec3> pos) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pos.size(); ++j)
    for (std::size_t k = j + 1; k < pos.size(); ++k) best = std::min(best, norm(pos[j] - pos[k]));
  return best;
}

double max_radius(std::span<const Vec3> pos) {
  double best = 0.0;
  for (const auto& p : pos) best = std::max(best, norm(p));
  return best;
}

IonSystem::IonSystem(IonSpec hot, std::vector<IonSpec> cold, TrapConfig trap)
    : hot_(hot), cold_(std::move(cold)), trap_(trap) {
  hot_.validate();
  if (cold_.empty()) throw InvalidArgument("at least one cold ion is required");
  for (const auto& c : cold_) c.validate();
  trap_.validate();

  scales_ = derive_scales(hot_.mass, trap_.omega_hot);
  gamma_ = trap_.gamma / scales_.omega;

  const std::size_t n = cold_.size() + 1;
  mass_ratio_.resize(n);
  omega_sq_.resize(n);
  spring_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const IonSpec& ion = j == 0 ? hot_ : cold_[j - 1];
    const Vec3 w = trap_.omega_for(hot_, ion, j == 0);
    mass_ratio_[j] = ion.mass / hot_.mass;
    for (std::size_t i = 0; i < 3; ++i) {
      const double r = w[i] / scales_.omega;
      omega_sq_[j][i] = r * r;
      spring_[j][i] = mass_ratio_[j] * r * r;
    }
  }

  ground_ = find_equilibrium(spring_);
  cold_crystal_ = find_equilibrium(std::span<const Vec3>(spring_).subspan(1));
}

void IonSystem::coulomb_forces(std::span<const Vec3> pos, std::span<Vec3> force) const {
  const std::size_t n = pos.size();
  for (std::size_t j = 0; j < n; ++j) force[j] = Vec3{};
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j + 1; k < n; ++k) {
      const Vec3 r = pos[j] - pos[k];
      const double r2 = dot(r, r);
      const double f = 0.5 / (r2 * std::sqrt(r2));
      const Vec3 fr = r * f;
      force[j] += fr;
      force[k] -= fr;
    }
  }
}

void IonSystem::accelerations(std::span<const Vec3> pos, std::span<const Vec3> vel,
                              std::span<Vec3> acc) const {
  const std::size_t n = pos.size();
  coulomb_forces(pos, acc);
  for (std::size_t j = 0; j < n; ++j) {
    const double inv_mu = 1.0 / mass_ratio_[j];
    const double g = j == 0 ? 0.0 : gamma_;
    for (std::size_t i = 0; i < 3; ++i)
      acc[j][i] = acc[j][i] * inv_mu - omega_sq_[j][i] * pos[j][i] - g * vel[j][i];
  }
}

double IonSystem::potential_energy(std::span<const Vec3> pos) const {
  double e = 0.0;
  for (std::size_t j = 0; j < pos.size(); ++j) {
    for (std::size_t i = 0; i < 3; ++i) e += spring_[j][i] * pos[j][i] * pos[j][i];
    for (std::size_t k = j + 1; k < pos.size(); ++k) e += 1.0 / norm(pos[j] - pos[k]);
  }
  return e;
}

double IonSystem::total_energy(std::span<const Vec3> pos, std::span<const Vec3> vel) const {
  double e = potential_energy(pos);
  for (std::size_t j = 0; j < vel.size(); ++j) e += mass_ratio_[j] * dot(vel[j], vel[j]);
  return e;
}

Vec3 IonSystem::axis_energies(std::size_t ion, const Vec3& pos, const Vec3& vel) const {
  Vec3 e;
  for (std::size_t i = 0; i < 3; ++i)
    e[i] = mass_ratio_[ion] * (vel[i] * vel[i] + omega_sq_[ion][i] * pos[i] * pos[i]);
  return e;
}

const Equilibrium& IonSystem::ground_state() const { return ground_; }
const Equilibrium& IonSystem::cold_crystal() const { return cold_crystal_; }

SystemState IonSystem::to_scaled(const SystemState& si) const {
  SystemState out;
  out.time = si.time * scales_.omega;
  const double vscale = 1.0 / (scales_.d * scales_.omega);
  for (const auto& p : si.positions) out.positions.push_back(p * (1.0 / scales_.d));
  for (const auto& v : si.velocities) out.velocities.push_back(v * vscale);
  return out;
}

SystemState IonSystem::to_physical(const SystemState& scaled) const {
  SystemState out;
  out.time = scaled.time / scales_.omega;
  const double vscale = scales_.d * scales_.omega;
  for (const auto& p : scaled.positions) out.positions.push_back(p * scales_.d);
  for (const auto& v : scaled.velocities) out.velocities.push_back(v * vscale);
  return out;
}

std::vector<Vec3> IonSystem::physical_accelerations(const SystemState& si) const {
  if (si.size() != size()) throw InvalidArgument("state size does not match the ion system");
  si.validate();
  const SystemState s = to_scaled(si);
  std::vector<Vec3> acc(size());
  accelerations(s.positions, s.velocities, acc);
  const double ascale = scales_.d * scales_.omega * scales_.omega;
  for (auto& a : acc) a *= ascale;
  return acc;
}

double IonSystem::physical_energy(const SystemState& si) const {
  const SystemState s = to_scaled(si);
  return total_energy(s.positions, s.velocities) * scales_.energy;
}

namespace {

struct EnergyModel {
  std::span<const Vec3> springs;

  std::size_t dim() const { return 3 * springs.size(); }

  double value(const std::vector<double>& x) const {
    const std::size_t n = springs.size();
    double e = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < 3; ++i) e += springs[j][i] * x[3 * j + i] * x[3 * j + i];
      for (std::size_t k = j + 1; k < n; ++k) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
          const double dr = x[3 * j + i] - x[3 * k + i];
          r2 += dr * dr;
        }
        if (r2 == 0.0) return std::numeric_limits<double>::infinity();
        e += 1.0 / std::sqrt(r2);
      }
    }
    return e;
  }

  void gradient(const std::vector<double>& x, std::vector<double>& g) const {
    const std::size_t n = springs.size();
    g.assign(dim(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < 3; ++i) g[3 * j + i] += 2.0 * springs[j][i] * x[3 * j + i];
      for (std::size_t k = j + 1; k < n; ++k) {
        double dr[3];
        double r2 = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
          dr[i] = x[3 * j + i] - x[3 * k + i];
          r2 += dr[i] * dr[i];
        }
        const double inv3 = 1.0 / (r2 * std::sqrt(r2));
        for (std::size_t i = 0; i < 3; ++i) {
          g[3 * j + i] -= dr[i] * inv3;
          g[3 * k + i] += dr[i] * inv3;
        }
      }
    }
  }
};

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// BFGS with Armijo backtracking on the inverse-Hessian approximation.
std::vector<double> minimize(const EnergyModel& model, std::vector<double> x) {
  const std::size_t n = model.dim();
  std::vector<double> h(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
  std::vector<double> g, g_new, p(n), s(n), y(n), x_new(n), hy(n);
  model.gradient(x, g);
  double f = model.value(x);

  for (int iter = 0; iter < 20000 && max_abs(g) > 1e-13; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc -= h[i * n + k] * g[k];
      p[i] = acc;
    }
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += p[i] * g[i];
    if (slope >= 0.0) {
      // Lost descent direction: reset to steepest descent.
      std::fill(h.begin(), h.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        h[i * n + i] = 1.0;
        p[i] = -g[i];
      }
      slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope += p[i] * g[i];
    }

    double step = 1.0;
    double f_new = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * p[i];
      f_new = model.value(x_new);
      if (f_new <= f + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    if (!(f_new <= f)) break;

    model.gradient(x_new, g_new);
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
      sy += s[i] * y[i];
    }
    x = x_new;
    g = g_new;
    f = f_new;
    if (sy <= 1e-300) continue;

    double yhy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += h[i * n + k] * y[k];
      hy[i] = acc;
      yhy += y[i] * acc;
    }
    const double rho = 1.0 / sy;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        h[i * n + k] += (1.0 + yhy * rho) * rho * s[i] * s[k] - rho * (hy[i] * s[k] + s[i] * hy[k]);
  }
  return x;
}

}  // namespace

Equilibrium find_equilibrium(std::span<const Vec3> springs) {
  const std::size_t n = springs.size();
  Equilibrium best;
  best.positions.assign(n, Vec3{});
  if (n <= 1) return best;

  EnergyModel model{springs};

  // Weakest axis, averaged over ions, hosts the linear chain start.
  std::size_t axis = 0;
  double weakest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 3; ++i) {
    double k = 0.0;
    for (const auto& s : springs) k += s[i];
    if (k < weakest) {
      weakest = k;
      axis = i;
    }
  }

  std::vector<std::vector<double>> starts;
  {
    std::vector<double> x(3 * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      x[3 * j + axis] = (static_cast<double>(j) - 0.5 * static_cast<double>(n - 1));
      const double sign = (j % 2 == 0) ? 1.0 : -1.0;
      x[3 * j + (axis + 1) % 3] = 0.03 * sign;
      x[3 * j + (axis + 2) % 3] = 0.02 * sign;
    }
    starts.push_back(x);
  }
  std::mt19937_64 rng(0x5eed5eedULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double radius = std::cbrt(static_cast<double>(n));
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<double> x(3 * n);
    for (auto& v : x) v = radius * u(rng);
    starts.push_back(x);
  }

  best.energy = std::numeric_limits<double>::infinity();
  for (auto& start : starts) {
    const std::vector<double> x = minimize(model, start);
    const double e = model.value(x);
    if (e < best.energy) {
      best.energy = e;
      for (std::size_t j = 0; j < n; ++j) best.positions[j] = Vec3{x[3 * j], x[3 * j + 1], x[3 * j + 2]};
    }
  }
  if (!std::isfinite(best.energy)) throw NumericalError("equilibrium search failed");
  return best;
}

}  // namespace sympcool::dynamics
