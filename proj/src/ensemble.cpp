#include "sympcool/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "sympcool/analytic.hpp"
#include "sympcool/error.hpp"

namespace sympcool::ensemble {

using dynamics::IonSystem;
using dynamics::Outcome;
using dynamics::SystemState;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t point, std::size_t trial) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(point)) ^ static_cast<std::uint64_t>(trial));
}

SystemState sample_initial(const IonSystem& system, double e0_over_ed, std::mt19937_64& rng) {
  if (!(e0_over_ed >= 0.0) || !std::isfinite(e0_over_ed)) throw InvalidArgument("initial energy must be non-negative");
  const double theta = e0_over_ed / 3.0;
  std::normal_distribution<double> gauss(0.0, 1.0);
  SystemState s;
  Vec3 r, v;
  for (int i = 0; i < 3; ++i) {
    r[i] = gauss(rng) * std::sqrt(theta / (2.0 * system.omega_sq(0)[i]));
    v[i] = gauss(rng) * std::sqrt(theta / 2.0);
  }
  s.positions.push_back(r);
  s.velocities.push_back(v);
  for (const auto& p : system.cold_crystal().positions) {
    s.positions.push_back(p);
    s.velocities.push_back({});
  }
  return s;
}

double hot_oscillator_energy(const IonSystem& system, const SystemState& scaled) {
  const Vec3 e = system.axis_energies(0, scaled.positions[0], scaled.velocities[0]);
  return e[0] + e[1] + e[2];
}

void EnsembleSpec::validate() const {
  hot.validate();
  cold.validate();
  trap.validate();
  controls.validate();
  if (n_cold < 1) throw InvalidArgument("n_cold must be at least 1");
  if (trials_per_point < 1) throw InvalidArgument("trials_per_point must be at least 1");
  if (e0_grid.empty()) throw InvalidArgument("E0 grid is empty");
  for (double e : e0_grid)
    if (!(e > 1.0) || !std::isfinite(e)) throw InvalidArgument("E0 grid values must exceed 1 (E_d)");
  if (!(t_max_periods > 0.0) && !(t_max_factor > 0.0)) throw InvalidArgument("t_max_factor must be positive");
}

double EnsembleSpec::t_max_at(double e0) const {
  if (t_max_periods > 0.0) return t_max_periods;
  return t_max_factor * models::scaled::simple_cooling_time(e0, hot.mass, cold.mass);
}

std::string TrialResult::verdict() const {
  switch (status) {
    case TrialStatus::Pending: return "pending";
    case TrialStatus::Failed: return "failed";
    case TrialStatus::Done: return dynamics::to_string(outcome);
  }
  return "pending";
}

double PointStatistics::timed_out_fraction() const {
  const std::size_t n = crystallized + lost + timed_out + failed;
  return n ? static_cast<double>(timed_out) / static_cast<double>(n) : 0.0;
}

bool EnsembleResult::complete() const {
  for (const auto& p : points)
    for (const auto& t : p.trials)
      if (t.status == TrialStatus::Pending) return false;
  return true;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("percentile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

PointStatistics summarize(const std::vector<TrialResult>& trials) {
  PointStatistics s;
  std::vector<double> times;
  for (const auto& t : trials) {
    switch (t.status) {
      case TrialStatus::Pending: ++s.pending; continue;
      case TrialStatus::Failed: ++s.failed; continue;
      case TrialStatus::Done: break;
    }
    switch (t.outcome) {
      case Outcome::Crystallized:
        ++s.crystallized;
        times.push_back(t.t_cool_periods);
        break;
      case Outcome::Lost: ++s.lost; break;
      case Outcome::TimedOut: ++s.timed_out; break;
    }
  }
  if (times.empty()) return s;
  // Sorted summation keeps the statistics independent of trial completion order.
  std::sort(times.begin(), times.end());
  double sum = 0.0;
  for (double t : times) sum += t;
  s.mean = sum / static_cast<double>(times.size());
  if (times.size() > 1) {
    double ss = 0.0;
    for (double t : times) ss += (t - s.mean) * (t - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(times.size() - 1));
  }
  s.p10 = percentile(times, 0.1);
  s.p90 = percentile(times, 0.9);
  s.median = percentile(times, 0.5);
  return s;
}

std::size_t default_workers() {
  if (const char* env = std::getenv("SYMPCOOL_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

TrialResult run_trial(const IonSystem& system, double e0, double t_max_periods,
                      const dynamics::IntegrationControls& controls, std::uint64_t seed) {
  TrialResult r;
  r.seed = seed;
  try {
    std::mt19937_64 rng(seed);
    const SystemState initial = sample_initial(system, e0, rng);
    auto c = controls;
    c.t_max_periods = t_max_periods;
    const auto record = dynamics::integrate(system, initial, c, seed);
    r.status = TrialStatus::Done;
    r.outcome = record.verdict.outcome;
    r.t_cool_periods = record.verdict_periods();
  } catch (const std::exception& e) {
    r.status = TrialStatus::Failed;
    r.error = e.what();
  }
  return r;
}

EnsembleResult run_ensemble(const EnsembleSpec& spec, const RunOptions& options) {
  spec.validate();
  const IonSystem system(spec.hot, std::vector<dynamics::IonSpec>(spec.n_cold, spec.cold), spec.trap);

  EnsembleResult result;
  struct Job {
    std::size_t point, trial;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < spec.e0_grid.size(); ++p) {
    PointResult pr;
    pr.e0 = spec.e0_grid[p];
    pr.n_cold = spec.n_cold;
    pr.trials.resize(spec.trials_per_point);
    for (std::size_t k = 0; k < spec.trials_per_point; ++k) {
      auto& t = pr.trials[k];
      t.seed = trial_seed(spec.seed, p, k);
      const auto prev = options.previous.find({p, k});
      if (prev != options.previous.end() && prev->second.seed == t.seed && prev->second.status != TrialStatus::Pending)
        t = prev->second;
      else
        jobs.push_back({p, k});
    }
    result.points.push_back(std::move(pr));
  }

  std::atomic<std::size_t> next{0};
  std::mutex report;
  const auto worker = [&] {
    for (;;) {
      if (options.cancel && options.cancel->load()) return;
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      auto& point = result.points[jobs[j].point];
      auto& slot = point.trials[jobs[j].trial];
      slot = run_trial(system, point.e0, spec.t_max_at(point.e0), spec.controls, slot.seed);
      if (options.on_trial) {
        std::lock_guard lock(report);
        options.on_trial(jobs[j].point, jobs[j].trial, slot);
      }
    }
  };
  const std::size_t workers = std::min(options.workers ? options.workers : default_workers(), std::max<std::size_t>(1, jobs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (auto& p : result.points) {
    p.stats = summarize(p.trials);
    p.stats.model_prediction = models::scaled::simple_cooling_time(p.e0, spec.hot.mass, spec.cold.mass);
  }
  return result;
}

void write_scatter_csv(std::ostream& os, const EnsembleResult& result) {
  os << "E0_over_Ed,n_cold,seed,verdict,t_cool_periods\n" << std::setprecision(12);
  for (const auto& p : result.points)
    for (const auto& t : p.trials) {
      if (t.status == TrialStatus::Pending) continue;
      os << p.e0 << ',' << p.n_cold << ',' << t.seed << ',' << t.verdict() << ',';
      if (t.status == TrialStatus::Done) os << t.t_cool_periods;
      os << '\n';
    }
}

std::map<std::pair<std::size_t, std::size_t>, TrialResult> read_scatter_csv(std::istream& is, const EnsembleSpec& spec) {
  std::unordered_map<std::uint64_t, std::pair<std::size_t, std::size_t>> index;
  for (std::size_t p = 0; p < spec.e0_grid.size(); ++p)
    for (std::size_t k = 0; k < spec.trials_per_point; ++k) index[trial_seed(spec.seed, p, k)] = {p, k};

  std::map<std::pair<std::size_t, std::size_t>, TrialResult> out;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::string e0s, ncs, seeds, verdict, ts;
    std::getline(row, e0s, ',');
    std::getline(row, ncs, ',');
    std::getline(row, seeds, ',');
    std::getline(row, verdict, ',');
    std::getline(row, ts, ',');
    std::uint64_t seed = 0;
    double e0 = 0.0;
    std::size_t nc = 0;
    try {
      seed = std::stoull(seeds);
      e0 = std::stod(e0s);
      nc = std::stoul(ncs);
    } catch (const std::exception&) {
      continue;
    }
    const auto it = index.find(seed);
    if (it == index.end() || nc != spec.n_cold) continue;
    if (std::abs(spec.e0_grid[it->second.first] - e0) > 1e-9 * e0) continue;
    TrialResult t;
    t.seed = seed;
    if (verdict == "failed") {
      t.status = TrialStatus::Failed;
      t.error = "failed in an earlier run";
    } else if (verdict == "crystallized" || verdict == "lost" || verdict == "timed_out") {
      t.status = TrialStatus::Done;
      t.outcome = dynamics::outcome_from_string(verdict);
      try {
        t.t_cool_periods = ts.empty() ? 0.0 : std::stod(ts);
      } catch (const std::exception&) {
        continue;
      }
    } else {
      continue;
    }
    out[it->second] = t;
  }
  return out;
}

namespace {

std::vector<double> moving_average(const std::vector<double>& x, std::size_t half) {
  std::vector<double> out(x.size());
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) prefix[k + 1] = prefix[k] + x[k];
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(x.size(), k + half + 1);
    out[k] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace

ExchangeProbeResult equal_mass_exchange_probe(double e0_over_ed, std::size_t axis, double duration_periods,
                                              std::mt19937_64& rng, dynamics::TrapConfig trap,
                                              dynamics::IntegrationControls controls) {
  if (axis > 2) throw InvalidArgument("axis must be 0, 1 or 2");
  if (trap.gamma != 0.0) throw InvalidArgument("the exchange probe runs without friction");
  if (!(duration_periods > 0.0)) throw InvalidArgument("probe duration must be positive");
  const auto hot = dynamics::aluminium27();
  const IonSystem system(hot, {hot}, trap);
  if (!(e0_over_ed > 1.0)) throw InvalidArgument("probe energy must exceed E_d");
  SystemState initial = sample_initial(system, e0_over_ed, rng);
  const double scale = std::sqrt(e0_over_ed / hot_oscillator_energy(system, initial));
  initial.positions[0] = initial.positions[0] * scale;
  initial.velocities[0] = initial.velocities[0] * scale;

  controls.t_max_periods = duration_periods;
  controls.stop_on_verdict = false;
  controls.sample_interval_periods = std::min(controls.sample_interval_periods, 0.25);

  ExchangeProbeResult out;
  out.axis = axis;
  out.initial_energy = e0_over_ed;
  const double period = 2.0 * std::numbers::pi;
  dynamics::integrate(system, initial, controls, 0, [&](double t, std::span<const Vec3> pos, std::span<const Vec3> vel) {
    ExchangeSample s;
    s.t = t / period;
    s.hot = system.axis_energies(0, pos[0], vel[0])[axis];
    s.cold = system.axis_energies(1, pos[1], vel[1])[axis];
    s.total = system.total_energy(pos, vel);
    out.series.push_back(s);
  });
  if (out.series.size() < 3) throw InvalidArgument("probe duration too short for the sample interval");

  const double e_start = out.series.front().total;
  double axis_sum = 0.0;
  std::vector<double> diff;
  for (const auto& s : out.series) {
    out.energy_drift = std::max(out.energy_drift, std::abs(s.total - e_start) / std::abs(e_start));
    axis_sum += s.hot + s.cold;
    diff.push_back(s.hot - s.cold);
  }
  out.axis_energy = axis_sum / static_cast<double>(out.series.size());

  // Smooth over about two trap periods, then pick one maximum per excursion above the
  // upper hysteresis level.
  const double dt = out.series[1].t - out.series[0].t;
  const auto smooth = moving_average(diff, static_cast<std::size_t>(std::ceil(1.0 / dt)));
  const auto [mn, mx] = std::minmax_element(smooth.begin(), smooth.end());
  const double mid = 0.5 * (*mn + *mx);
  const double band = 0.3 * 0.5 * (*mx - *mn);
  std::vector<double> peaks;
  bool high = false;
  double best = 0.0, best_t = 0.0;
  for (std::size_t k = 0; k < smooth.size(); ++k) {
    if (!high && smooth[k] > mid + band) {
      high = true;
      best = smooth[k];
      best_t = out.series[k].t;
    } else if (high) {
      if (smooth[k] > best) {
        best = smooth[k];
        best_t = out.series[k].t;
      }
      if (smooth[k] < mid - band) {
        high = false;
        peaks.push_back(best_t);
      }
    }
  }
  out.peaks = peaks.size();
  if (peaks.size() >= 2) {
    out.period = (peaks.back() - peaks.front()) / static_cast<double>(peaks.size() - 1);
    out.exchange_time = 0.5 * out.period;
  }
  // E = m w^2 r^2 sets the separation, i.e. r/d = sqrt(E / 2E_d).
  const auto predicted = [&](double e) {
    return std::numbers::pi / models::scaled::exchange_frequency(std::sqrt(e / 2.0)) / period;
  };
  out.predicted_exchange = predicted(out.initial_energy);
  out.predicted_axis = predicted(out.axis_energy);
  return out;
}

}  // namespace sympcool::ensemble
