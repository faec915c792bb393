#include "sympcool/trajectory.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "sympcool/constants.hpp"
#include "sympcool/error.hpp"
#include "sympcool/integrator.hpp"

namespace sympcool::dynamics {

namespace {

constexpr double kTwoPi = 2.0 * constants::kPi;

struct Rhs {
  const IonSystem* system;
  std::size_t n;
  std::vector<Vec3> pos, vel, acc;

  void operator()(double, std::span<const double> y, std::span<double> dydt) {
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < 3; ++i) {
        pos[j][i] = y[3 * j + i];
        vel[j][i] = y[3 * (n + j) + i];
      }
    system->accelerations(pos, vel, acc);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < 3; ++i) {
        dydt[3 * j + i] = vel[j][i];
        dydt[3 * (n + j) + i] = acc[j][i];
      }
  }
};

void unpack(std::span<const double> y, std::size_t n, std::vector<Vec3>& pos, std::vector<Vec3>& vel) {
  pos.resize(n);
  vel.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < 3; ++i) {
      pos[j][i] = y[3 * j + i];
      vel[j][i] = y[3 * (n + j) + i];
    }
}

std::string describe(double t, const std::vector<Vec3>& pos, const std::vector<Vec3>& vel) {
  std::ostringstream os;
  os << std::setprecision(17) << "t=" << t;
  for (std::size_t j = 0; j < pos.size(); ++j) {
    os << " ion" << j << " r=(" << pos[j][0] << "," << pos[j][1] << "," << pos[j][2] << ") v=("
       << vel[j][0] << "," << vel[j][1] << "," << vel[j][2] << ")";
  }
  return os.str();
}

}  // namespace

void IntegrationControls::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw InvalidArgument("tolerances must be positive");
  if (!(t_max_periods > 0.0)) throw InvalidArgument("t_max must be positive");
  if (!(sample_interval_periods > 0.0)) throw InvalidArgument("sample_interval must be positive");
  if (!(escape_radius > 0.0)) throw InvalidArgument("escape_radius must be positive");
  if (!(crystal_threshold > 0.0)) throw InvalidArgument("crystal_threshold must be positive");
  if (!(crystal_window_periods >= 0.0)) throw InvalidArgument("crystal_window must be >= 0");
  if (!(min_distance > 0.0)) throw InvalidArgument("min_distance must be positive");
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Crystallized: return "crystallized";
    case Outcome::Lost: return "lost";
    case Outcome::TimedOut: return "timed_out";
  }
  return "unknown";
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "crystallized") return Outcome::Crystallized;
  if (s == "lost") return Outcome::Lost;
  if (s == "timed_out") return Outcome::TimedOut;
  throw InvalidArgument("unknown outcome '" + s + "'");
}

double TrajectoryRecord::verdict_periods() const { return verdict.time / kTwoPi; }

std::optional<Verdict> CrystallizationMonitor::observe(const Sample& s) {
  if (s.max_radius > config_.escape_radius) return Verdict{Outcome::Lost, s.t};
  if (s.energy - config_.ground_energy < config_.threshold) {
    if (!below_since_) below_since_ = s.t;
    if (s.t - *below_since_ >= config_.window) return Verdict{Outcome::Crystallized, *below_since_};
  } else {
    below_since_.reset();
  }
  return std::nullopt;
}

std::optional<Verdict> classify(std::span<const Sample> samples, const ClassifierConfig& config) {
  CrystallizationMonitor monitor(config);
  for (const auto& s : samples)
    if (auto v = monitor.observe(s)) return v;
  return std::nullopt;
}

TrajectoryRecord integrate(const IonSystem& system, const SystemState& initial,
                           const IntegrationControls& controls, std::uint64_t seed,
                           const SampleObserver& observer) {
  controls.validate();
  initial.validate();
  const std::size_t n = system.size();
  if (initial.size() != n) throw InvalidArgument("initial state size does not match the ion system");

  std::vector<double> y(6 * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < 3; ++i) {
      y[3 * j + i] = initial.positions[j][i];
      y[3 * (n + j) + i] = initial.velocities[j][i];
    }

  StepControl sc;
  sc.rel_tol = controls.rel_tol;
  sc.abs_tol = controls.abs_tol;
  Dop853<Rhs> stepper(Rhs{&system, n, std::vector<Vec3>(n), std::vector<Vec3>(n), std::vector<Vec3>(n)},
                      6 * n, sc);
  stepper.initialize(initial.time, y);

  TrajectoryRecord record;
  record.seed = seed;
  record.scales = system.scales();
  record.ground_energy = system.ground_state().energy;

  ClassifierConfig cc;
  cc.ground_energy = record.ground_energy;
  cc.threshold = controls.crystal_threshold;
  cc.window = controls.crystal_window_periods * kTwoPi;
  cc.escape_radius = controls.escape_radius;
  CrystallizationMonitor monitor(cc);

  const double t0 = initial.time;
  const double t_end = t0 + controls.t_max_periods * kTwoPi;
  const double dt_sample = controls.sample_interval_periods * kTwoPi;

  std::vector<Vec3> pos, vel;
  unpack(stepper.state(), n, pos, vel);
  double running_min = min_distance(pos);

  auto take_sample = [&](double t) {
    Sample s;
    s.t = t;
    s.energy = system.total_energy(pos, vel);
    s.hot_axis_energy = system.axis_energies(0, pos[0], vel[0]);
    s.min_distance = running_min;
    s.max_radius = max_radius(pos);
    record.samples.push_back(s);
    if (observer) observer(t, pos, vel);
    running_min = std::numeric_limits<double>::infinity();
    return monitor.observe(s);
  };

  std::optional<Verdict> verdict = take_sample(t0);
  std::size_t next_index = 1;
  while (!(verdict && controls.stop_on_verdict)) {
    const double t_sample = t0 + static_cast<double>(next_index) * dt_sample;
    const double target = std::min(t_sample, t_end);
    if (stepper.time() >= t_end) break;
    try {
      stepper.step(target);
    } catch (const NumericalError& e) {
      unpack(stepper.state(), n, pos, vel);
      throw NumericalError(std::string(e.what()) + " at " + describe(stepper.time(), pos, vel));
    }
    unpack(stepper.state(), n, pos, vel);
    const double dmin = min_distance(pos);
    if (dmin < controls.min_distance)
      throw NumericalError("close-encounter guard tripped (distance " + std::to_string(dmin) + " d) at " +
                           describe(stepper.time(), pos, vel));
    running_min = std::min(running_min, dmin);
    if (stepper.time() == target) {
      auto v = take_sample(target);
      if (v && !verdict) verdict = v;
      if (target == t_sample) ++next_index;
      if (target == t_end) break;
    }
  }

  record.verdict = verdict ? *verdict : Verdict{Outcome::TimedOut, stepper.time()};
  record.steps = stepper.accepted_steps();
  record.rejected_steps = stepper.rejected_steps();
  record.final_state.time = stepper.time();
  record.final_state.positions = pos;
  record.final_state.velocities = vel;
  return record;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record) {
  os << "t,E_total,E_x,E_y,E_z,r_min\n";
  os << std::setprecision(12);
  for (const auto& s : record.samples) {
    os << s.t << ',' << s.energy << ',' << s.hot_axis_energy[0] << ',' << s.hot_axis_energy[1] << ','
       << s.hot_axis_energy[2] << ',' << s.min_distance << '\n';
  }
}

}  // namespace sympcool::dynamics
