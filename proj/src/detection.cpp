#include "sympcool/detection.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

#include "sympcool/constants.hpp"
#include "sympcool/error.hpp"

namespace sympcool::readout {

namespace {

double interpolate(const std::vector<double>& ts, const std::vector<double>& es, double t) {
  if (t <= ts.front()) return es.front();
  if (t >= ts.back()) return es.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - ts.begin());
  const double w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
  return es[k - 1] + w * (es[k] - es[k - 1]);
}

EnergyProfile tabulated(std::vector<double> ts, std::vector<double> es) {
  if (ts.size() < 2) throw InvalidArgument("energy profile needs at least two points");
  for (std::size_t k = 1; k < ts.size(); ++k)
    if (!(ts[k] > ts[k - 1])) throw InvalidArgument("energy profile times must increase");
  const double t_end = ts.back();
  return {[ts = std::move(ts), es = std::move(es)](double t) { return interpolate(ts, es, t); }, t_end};
}

std::pair<double, double> wilson(std::size_t successes, std::size_t n, double z) {
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace

void DetectionProtocol::validate() const {
  if (!(cool_ms >= 0.0 && wait_ms >= 0.0 && detect_ms >= 0.0))
    throw InvalidArgument("protocol durations must be non-negative");
  if (!(cycles_per_s > 0.0)) throw InvalidArgument("cycles_per_s must be positive");
  if (1e-3 * (cool_ms + wait_ms + detect_ms) > period() * (1.0 + 1e-12))
    throw InvalidArgument("cool + wait + detect exceeds the cycle period");
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("eta must lie in (0, 1)");
  if (!(doppler_nbar >= 0.0)) throw InvalidArgument("doppler_nbar must be non-negative");
  if (!(readout_omega > 0.0)) throw InvalidArgument("readout_omega must be positive");
  if (!(ambient_rate >= 0.0)) throw InvalidArgument("ambient_rate must be non-negative");
  if (!(nbar_ceiling > doppler_nbar)) throw InvalidArgument("nbar_ceiling must exceed doppler_nbar");
}

EnergyProfile profile_from_model(const models::AnalyticModelParams& p, double load_time,
                                 std::optional<double> lost_after) {
  p.validate();
  if (lost_after && !(*lost_after >= 0.0)) throw InvalidArgument("lost_after must be non-negative");
  const double ed = p.scales.energy;
  const double t_cool = models::simple_cooling_time(p);
  const double active = lost_after ? std::min(*lost_after, t_cool) : t_cool;
  const auto shape = [p, ed](double s) { return std::max(models::simple_energy_at(s, p), ed); };
  return {[=](double t) {
            const double s = std::clamp(t - load_time, 0.0, active);
            return shape(s);
          },
          load_time + active};
}

EnergyProfile profile_from_curve(const models::CoolingCurve& curve, double load_time) {
  std::vector<double> ts;
  std::vector<double> es;
  for (const auto& pt : curve.points) {
    ts.push_back(load_time + pt.t);
    es.push_back(pt.energy);
  }
  return tabulated(std::move(ts), std::move(es));
}

EnergyProfile profile_from_trajectory(const dynamics::TrajectoryRecord& record, double load_time) {
  std::vector<double> ts;
  std::vector<double> es;
  for (const auto& s : record.samples) {
    ts.push_back(load_time + s.t / record.scales.omega);
    es.push_back(std::max(0.0, s.energy - record.ground_energy) * record.scales.energy);
  }
  return tabulated(std::move(ts), std::move(es));
}

double excitation_probability(double nbar, const DetectionProtocol& protocol) {
  const ThermalMotionalState state{nbar, protocol.eta};
  return protocol.model == ExcitationModel::RmsCoupling ? pi_pulse_excitation(state)
                                                        : pi_pulse_excitation_exact(state);
}

double cycle_nbar(const EnergyProfile& profile, const DetectionProtocol& protocol, double t, double wait) {
  if (wait <= 0.0) return protocol.doppler_nbar;
  // Heating starts once the cooling beams are off and is shared equally by three modes.
  const double start = t + 1e-3 * protocol.cool_ms;
  const double transferred = std::max(0.0, profile.energy(start) - profile.energy(start + wait));
  const double quantum = 3.0 * constants::kHbar * protocol.readout_omega;
  return protocol.doppler_nbar + transferred / quantum + protocol.ambient_rate * wait;
}

std::vector<DetectionCycleRecord> synthesize_signal(const EnergyProfile& profile, const DetectionProtocol& protocol,
                                                    std::size_t cycles, std::mt19937_64& rng) {
  protocol.validate();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<DetectionCycleRecord> out;
  out.reserve(cycles);
  for (std::size_t k = 0; k < cycles; ++k) {
    DetectionCycleRecord rec;
    rec.t = static_cast<double>(k) * protocol.period();
    rec.control = protocol.interleave_control && k % 2 == 1;
    rec.wait = rec.control ? 0.0 : protocol.wait();
    const double p = excitation_probability(cycle_nbar(profile, protocol, rec.t, rec.wait), protocol);
    rec.outcome = uniform(rng) < p;
    out.push_back(rec);
  }
  return out;
}

EnergyAnalysis estimate_energy(const std::vector<DetectionCycleRecord>& cycles, std::size_t bin,
                               const DetectionProtocol& protocol, double z_score) {
  protocol.validate();
  if (bin < 50) throw InvalidArgument("bin size must be at least 50 cycles");

  std::vector<std::size_t> signal;
  for (std::size_t k = 0; k < cycles.size(); ++k)
    if (!cycles[k].control) signal.push_back(k);
  EnergyAnalysis result;
  if (signal.empty()) return result;

  const double wait = cycles[signal.front()].wait;
  if (!(wait > 0.0)) throw InvalidArgument("signal cycles need a positive waiting time");
  for (std::size_t k : signal)
    if (std::abs(cycles[k].wait - wait) > 1e-12 * wait) throw InvalidArgument("mixed waiting times in one stream");

  // Each signal cycle stands for the time until the next one.
  const double spacing = signal.size() > 1
                             ? (cycles[signal.back()].t - cycles[signal.front()].t) / (signal.size() - 1.0)
                             : protocol.period();
  const double quantum = 3.0 * constants::kHbar * protocol.readout_omega;
  const InversionBracket bracket{0.0, protocol.nbar_ceiling};
  const MeanSquareForm form = MeanSquareForm::Exact;
  const auto invert = [&](double p) {
    if (protocol.model == ExcitationModel::RmsCoupling) return invert_excitation(p, protocol.eta, bracket, form);
    // Bisection on the truncated thermal sum.
    const auto f = [&](double n) { return pi_pulse_excitation_exact({n, protocol.eta}); };
    if (p >= f(bracket.lo)) return InversionResult{bracket.lo, false};
    if (p < f(bracket.hi)) return InversionResult{bracket.hi, true};
    double lo = bracket.lo;
    double hi = bracket.hi;
    while (hi - lo > 1e-4) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) > p ? lo : hi) = mid;
    }
    return InversionResult{0.5 * (lo + hi), false};
  };
  const auto heating = [&](double nbar) {
    const double gained = std::max(0.0, nbar - protocol.doppler_nbar - protocol.ambient_rate * wait);
    return gained;
  };

  const std::size_t nbins = std::max<std::size_t>(1, signal.size() / bin);
  for (std::size_t b = 0; b < nbins; ++b) {
    const std::size_t first = b * bin;
    const std::size_t last = b + 1 == nbins ? signal.size() : first + bin;  // remainder joins the last bin
    std::size_t hits = 0;
    for (std::size_t k = first; k < last; ++k) hits += cycles[signal[k]].outcome ? 1 : 0;

    EnergyEstimate est;
    est.cycles = last - first;
    est.t = 0.5 * (cycles[signal[first]].t + cycles[signal[last - 1]].t);
    est.p_hat = static_cast<double>(hits) / static_cast<double>(est.cycles);
    std::tie(est.p_lo, est.p_hi) = wilson(hits, est.cycles, z_score);

    std::size_t ctrl_hits = 0;
    std::size_t ctrl_n = 0;
    const double t0 = cycles[signal[first]].t;
    const double t1 = cycles[signal[last - 1]].t + spacing;
    for (const auto& c : cycles)
      if (c.control && c.t >= t0 && c.t < t1) {
        ++ctrl_n;
        ctrl_hits += c.outcome ? 1 : 0;
      }
    if (ctrl_n > 0) est.p_control = static_cast<double>(ctrl_hits) / static_cast<double>(ctrl_n);

    const auto centre = invert(est.p_hat);
    const auto upper = invert(est.p_lo);
    const auto lower = invert(est.p_hi);
    est.saturated = centre.saturated;
    est.nbar = heating(centre.nbar);
    est.nbar_lo = heating(lower.nbar);
    est.nbar_hi = heating(upper.nbar);

    const double duration = static_cast<double>(est.cycles) * spacing;
    const double to_energy = quantum / wait * duration;
    if (est.saturated) {
      ++result.saturated_bins;
      result.energy_floor += est.nbar * to_energy;
    } else {
      est.energy = est.nbar * to_energy;
    }
    est.E_lo = est.saturated ? 0.0 : est.nbar_lo * to_energy;
    est.E_hi = est.saturated ? 0.0 : est.nbar_hi * to_energy;
    result.bins.push_back(est);
  }

  double acc = 0.0;
  double acc_lo = 0.0;
  double acc_hi = 0.0;
  for (auto it = result.bins.rbegin(); it != result.bins.rend(); ++it) {
    acc += it->energy;
    acc_lo += it->E_lo;
    acc_hi += it->E_hi;
    it->E_excess = acc;
    it->E_lo = acc_lo;
    it->E_hi = acc_hi;
  }
  return result;
}

void write_cycles_csv(std::ostream& os, const std::vector<DetectionCycleRecord>& cycles) {
  os << "t,wait_ms,outcome,control\n" << std::setprecision(12);
  for (const auto& c : cycles)
    os << c.t << ',' << 1e3 * c.wait << ',' << (c.outcome ? 1 : 0) << ',' << (c.control ? 1 : 0) << '\n';
}

std::vector<DetectionCycleRecord> read_cycles_csv(std::istream& is) {
  std::vector<DetectionCycleRecord> out;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("t,wait_ms,outcome,control", 0) != 0)
        throw InvalidArgument("cycle CSV must start with the header t,wait_ms,outcome,control");
      header = true;
      continue;
    }
    std::istringstream row(line);
    DetectionCycleRecord rec;
    std::string cell[4];
    for (auto& c : cell)
      if (!std::getline(row, c, ',')) throw InvalidArgument("cycle CSV line " + std::to_string(lineno) + ": expected 4 fields");
    try {
      rec.t = std::stod(cell[0]);
      rec.wait = 1e-3 * std::stod(cell[1]);
      rec.outcome = std::stoi(cell[2]) != 0;
      rec.control = std::stoi(cell[3]) != 0;
    } catch (const std::exception&) {
      throw InvalidArgument("cycle CSV line " + std::to_string(lineno) + ": malformed number");
    }
    if (rec.wait < 0.0) throw InvalidArgument("cycle CSV line " + std::to_string(lineno) + ": negative wait");
    out.push_back(rec);
  }
  return out;
}

void write_estimates_csv(std::ostream& os, const EnergyAnalysis& analysis) {
  os << "t,p_hat,p_lo,p_hi,nbar,E_excess_eV\n" << std::setprecision(10);
  for (const auto& b : analysis.bins)
    os << b.t << ',' << b.p_hat << ',' << b.p_lo << ',' << b.p_hi << ',' << b.nbar << ','
       << b.E_excess / constants::kElectronVolt << '\n';
}

}  // namespace sympcool::readout
