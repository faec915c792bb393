#include "sympcool/velocimetry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "sympcool/error.hpp"

namespace sympcool::velocimetry {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct TauBin {
  double lo, hi;
};

// Weighted photon counts and expected background over arrival-time bins. `weight` is the
// per-photon weight and `weight_integral(a, b)` its integral over [a, b].
CorrectedHistogram accumulate(const std::vector<PhotonRecord>& records, std::vector<double> edges,
                              const std::vector<TauBin>& bins, double prompt_mask,
                              const std::function<double(double)>& weight,
                              const std::function<double(double, double)>& weight_integral) {
  if (!(prompt_mask >= 0.0)) throw InvalidArgument("prompt mask must be non-negative");
  const BackgroundEstimate bg = estimate_background(records);
  const double per_record_rate = bg.rate / static_cast<double>(records.size());

  CorrectedHistogram h;
  h.edges = std::move(edges);
  h.raw.assign(bins.size(), 0.0);
  h.background.assign(bins.size(), 0.0);
  h.background_rate = bg.rate;
  h.prompt_mask = prompt_mask;

  std::vector<double> lows(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) lows[k] = bins[k].lo;
  const bool ordered = std::is_sorted(lows.begin(), lows.end());
  if (!ordered) throw InvalidArgument("time bins must be ordered");

  for (const auto& rec : records) {
    for (double tau : rec.arrivals) {
      if (tau < prompt_mask) continue;
      auto it = std::upper_bound(lows.begin(), lows.end(), tau);
      if (it == lows.begin()) continue;
      const std::size_t k = static_cast<std::size_t>(it - lows.begin()) - 1;
      if (tau >= bins[k].hi) continue;
      h.raw[k] += weight(tau);
    }
    for (std::size_t k = 0; k < bins.size(); ++k) {
      const double a = std::max(bins[k].lo, prompt_mask);
      const double b = std::min(bins[k].hi, rec.window_end);
      if (b > a) h.background[k] += per_record_rate * weight_integral(a, b);
    }
  }

  h.entries.resize(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double r = h.raw[k] - h.background[k];
    if (r < 0.0) {
      h.clip_mass += r;
      h.entries[k] = 0.0;
    } else {
      h.entries[k] = r;
    }
    h.raw_total += h.raw[k];
    h.background_total += h.background[k];
  }
  return h;
}

}  // namespace

void BeamGeometry::validate() const {
  if (!(d_target > 0.0)) throw InvalidArgument("d_target must be positive");
  if (!(angle_deg > 0.0 && angle_deg < 180.0)) throw InvalidArgument("angle must lie in (0, 180) degrees");
  if (!(wavelength > 0.0)) throw InvalidArgument("wavelength must be positive");
}

void PhotonRecord::validate() const {
  if (!std::is_sorted(arrivals.begin(), arrivals.end())) throw InvalidArgument("arrivals must be sorted");
  if (!(window_end > window_start)) throw InvalidArgument("record window is empty");
  if (!arrivals.empty() && (arrivals.front() < window_start || arrivals.back() > window_end))
    throw InvalidArgument("arrival outside the record window");
}

double arrival_to_velocity(double tau, const BeamGeometry& geom) {
  if (!(tau > 0.0)) throw InvalidArgument("arrival time must be positive");
  return geom.d_target / tau;
}

double velocity_to_arrival(double v, const BeamGeometry& geom) {
  if (!(v > 0.0)) throw InvalidArgument("velocity must be positive");
  return geom.d_target / v;
}

double doppler_resonance(double v, const BeamGeometry& geom, double line_offset) {
  geom.validate();
  return v * std::cos(geom.angle_deg * kDeg) / geom.wavelength + line_offset;
}

void AnalysisOptions::validate() const {
  if (!(prompt_mask >= 0.0)) throw InvalidArgument("prompt_mask must be non-negative");
  if (!(v_min > 0.0 && v_max > v_min)) throw InvalidArgument("velocity range must satisfy 0 < v_min < v_max");
  if (bins < 1) throw InvalidArgument("need at least one velocity bin");
}

BackgroundEstimate estimate_background(const std::vector<PhotonRecord>& records) {
  BackgroundEstimate bg;
  for (const auto& rec : records) {
    rec.validate();
    if (rec.window_start >= 0.0) continue;
    bg.duration += rec.pre_trigger();
    bg.counts += static_cast<std::size_t>(
        std::lower_bound(rec.arrivals.begin(), rec.arrivals.end(), 0.0) - rec.arrivals.begin());
  }
  if (!(bg.duration > 0.0)) throw InvalidArgument("no pre-trigger data for background estimation");
  bg.rate = static_cast<double>(bg.counts) / bg.duration * static_cast<double>(records.size());
  return bg;
}

double CorrectedHistogram::total() const {
  double s = 0.0;
  for (double e : entries) s += e;
  return s;
}

CorrectedHistogram subtract_background(const std::vector<PhotonRecord>& records, const std::vector<double>& edges,
                                       double prompt_mask) {
  if (edges.size() < 2) throw InvalidArgument("need at least two bin edges");
  if (edges.front() < 0.0) throw InvalidArgument("time bins must start at or after the trigger");
  std::vector<TauBin> bins;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    if (!(edges[k + 1] > edges[k])) throw InvalidArgument("bin edges must increase");
    bins.push_back({edges[k], edges[k + 1]});
  }
  return accumulate(records, edges, bins, prompt_mask, [](double) { return 1.0; },
                    [](double a, double b) { return b - a; });
}

std::vector<double> VelocityHistogram::density() const {
  std::vector<double> out(hist.entries.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = hist.entries[k] / (hist.edges[k + 1] - hist.edges[k]);
  return out;
}

std::vector<double> VelocityHistogram::centres() const {
  std::vector<double> out(hist.entries.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::sqrt(hist.edges[k] * hist.edges[k + 1]);
  return out;
}

std::vector<double> log_edges(double lo, double hi, std::size_t bins) {
  if (!(lo > 0.0 && hi > lo) || bins < 1) throw InvalidArgument("invalid logarithmic binning");
  std::vector<double> e(bins + 1);
  const double step = std::log(hi / lo) / static_cast<double>(bins);
  for (std::size_t k = 0; k <= bins; ++k) e[k] = lo * std::exp(step * static_cast<double>(k));
  e.back() = hi;
  return e;
}

VelocityHistogram velocity_distribution(const std::vector<PhotonRecord>& records, const BeamGeometry& geom,
                                        TransitionMode mode, const AnalysisOptions& options) {
  geom.validate();
  options.validate();
  const auto edges = log_edges(options.v_min, options.v_max, options.bins);
  const double d = geom.d_target;
  // Bin k in v maps to (d / v_{k+1}, d / v_k] in time; listed in increasing time order.
  std::vector<TauBin> bins(options.bins);
  for (std::size_t k = 0; k < options.bins; ++k) bins[options.bins - 1 - k] = {d / edges[k + 1], d / edges[k]};

  VelocityHistogram out;
  if (mode == TransitionMode::OpenTransition) {
    out.weighting = Weighting::PerPhoton;
    out.hist = accumulate(records, edges, bins, options.prompt_mask, [](double) { return 1.0; },
                          [](double a, double b) { return b - a; });
  } else {
    out.weighting = Weighting::FluxCorrected;
    out.hist = accumulate(records, edges, bins, options.prompt_mask, [d](double tau) { return d / tau; },
                          [d](double a, double b) { return d * std::log(b / a); });
  }
  // Back to increasing velocity.
  std::reverse(out.hist.raw.begin(), out.hist.raw.end());
  std::reverse(out.hist.background.begin(), out.hist.background.end());
  std::reverse(out.hist.entries.begin(), out.hist.entries.end());
  return out;
}

double peak_velocity(const VelocityHistogram& h) {
  const auto dens = h.density();
  const auto centres = h.centres();
  const std::size_t n = dens.size();
  if (n == 0) throw InvalidArgument("empty histogram");
  std::vector<double> s(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double l = k > 0 ? dens[k - 1] : dens[k];
    const double r = k + 1 < n ? dens[k + 1] : dens[k];
    s[k] = 0.25 * l + 0.5 * dens[k] + 0.25 * r;
  }
  const std::size_t k = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
  if (s[k] <= 0.0) throw InvalidArgument("histogram has no positive entries");
  if (k == 0 || k + 1 == n) return centres[k];
  const double x0 = std::log(centres[k - 1]), x1 = std::log(centres[k]), x2 = std::log(centres[k + 1]);
  const double y0 = s[k - 1], y1 = s[k], y2 = s[k + 1];
  const double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
  const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
  const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
  if (!(a < 0.0)) return centres[k];
  return std::exp(std::clamp(-b / (2.0 * a), x0, x2));
}

CaptureWindow capture_window_filter(const std::vector<PhotonRecord>& records, const BeamGeometry& geom,
                                    double tau_delay, double tau_gate) {
  geom.validate();
  if (!(tau_delay >= 0.0)) throw InvalidArgument("tau_delay must be non-negative");
  if (!(tau_gate > 0.0)) throw InvalidArgument("tau_gate must be positive");
  const double close = tau_delay + tau_gate;
  CaptureWindow out;
  out.v_min = std::isfinite(close) ? geom.d_target / close : 0.0;
  out.v_max = tau_delay > 0.0 ? geom.d_target / tau_delay : std::numeric_limits<double>::infinity();
  for (const auto& rec : records) {
    PhotonRecord r = rec;
    r.arrivals.clear();
    for (double tau : rec.arrivals)
      if (tau < 0.0 || (tau >= tau_delay && tau <= close)) r.arrivals.push_back(tau);
    out.records.push_back(std::move(r));
  }
  return out;
}

std::vector<PhotonRecord> select_line(const std::vector<PhotonRecord>& records, const BeamGeometry& geom,
                                      double line_offset, double tolerance) {
  if (!(tolerance > 0.0)) throw InvalidArgument("line tolerance must be positive");
  std::vector<PhotonRecord> out;
  for (const auto& rec : records) {
    PhotonRecord r = rec;
    r.arrivals.clear();
    for (double tau : rec.arrivals) {
      // Pre-trigger photons stay so that the background can still be estimated.
      if (tau <= 0.0 ||
          std::abs(rec.detuning - doppler_resonance(arrival_to_velocity(tau, geom), geom, line_offset)) <= tolerance)
        r.arrivals.push_back(tau);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void PlumeModel::validate() const {
  if (!(mode_velocity > 0.0)) throw InvalidArgument("mode_velocity must be positive");
  if (!(spread > 0.0)) throw InvalidArgument("spread must be positive");
}

double PlumeModel::drift() const { return mode_velocity - 3.0 * spread * spread / mode_velocity; }

double PlumeModel::flux(double v) const {
  if (v <= 0.0) return 0.0;
  const double x = (v - drift()) / spread;
  return v * v * v * std::exp(-0.5 * x * x);
}

double PlumeModel::photon_density(double v) const {
  if (v <= 0.0) return 0.0;
  return transition == TransitionMode::OpenTransition ? flux(v) : flux(v) / v;
}

void GeneratorConfig::validate() const {
  plume.validate();
  geom.validate();
  if (!(window_start < 0.0 && window_end > 0.0)) throw InvalidArgument("generator window must straddle the trigger");
  if (!(background_rate >= 0.0)) throw InvalidArgument("background_rate must be non-negative");
  if (detunings.empty()) throw InvalidArgument("need at least one detuning");
  if (!(prompt_width > 0.0)) throw InvalidArgument("prompt_width must be positive");
}

std::vector<PhotonRecord> generate_plume(const GeneratorConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // Tabulated inverse CDF of the photon speed distribution.
  const double v_hi = std::max(config.plume.drift(), config.plume.mode_velocity) + 12.0 * config.plume.spread;
  constexpr std::size_t kGrid = 20000;
  std::vector<double> vs(kGrid + 1), cdf(kGrid + 1, 0.0);
  for (std::size_t k = 0; k <= kGrid; ++k) vs[k] = v_hi * static_cast<double>(k) / kGrid;
  for (std::size_t k = 1; k <= kGrid; ++k)
    cdf[k] = cdf[k - 1] + 0.5 * (config.plume.photon_density(vs[k - 1]) + config.plume.photon_density(vs[k])) *
                              (vs[k] - vs[k - 1]);
  for (auto& c : cdf) c /= cdf.back();
  const auto draw_speed = [&] {
    const double u = uniform(rng);
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), 1, kGrid);
    const double w = (u - cdf[k - 1]) / std::max(cdf[k] - cdf[k - 1], 1e-300);
    return vs[k - 1] + w * (vs[k] - vs[k - 1]);
  };

  std::vector<PhotonRecord> out;
  const std::size_t nrec = config.detunings.size();
  for (std::size_t r = 0; r < nrec; ++r) {
    PhotonRecord rec;
    rec.detuning = config.detunings[r];
    rec.window_start = config.window_start;
    rec.window_end = config.window_end;
    const std::size_t share = config.photons / nrec + (r < config.photons % nrec ? 1 : 0);
    for (std::size_t k = 0; k < share; ++k) {
      const double v = draw_speed();
      if (v <= 0.0) continue;
      const double tau = config.geom.d_target / v;
      if (tau <= config.window_end) rec.arrivals.push_back(tau);
    }
    const std::size_t prompt = config.prompt_photons / nrec;
    for (std::size_t k = 0; k < prompt; ++k) rec.arrivals.push_back(config.prompt_width * uniform(rng));
    std::poisson_distribution<long> poisson(config.background_rate * (config.window_end - config.window_start));
    const long nb = poisson(rng);
    for (long k = 0; k < nb; ++k)
      rec.arrivals.push_back(config.window_start + (config.window_end - config.window_start) * uniform(rng));
    std::sort(rec.arrivals.begin(), rec.arrivals.end());
    out.push_back(std::move(rec));
  }
  return out;
}

void write_photons_csv(std::ostream& os, const std::vector<PhotonRecord>& records) {
  os << "detuning_Hz,arrival_s\n" << std::setprecision(12);
  for (const auto& rec : records)
    for (double t : rec.arrivals) os << rec.detuning << ',' << t << '\n';
}

std::vector<PhotonRecord> read_photons_csv(std::istream& is, double window_start, double window_end) {
  std::map<double, std::vector<double>> groups;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("detuning_Hz,arrival_s", 0) != 0)
        throw InvalidArgument("photon CSV must start with the header detuning_Hz,arrival_s");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidArgument("photon CSV line " + std::to_string(lineno) + ": expected 2 fields");
    try {
      groups[std::stod(line.substr(0, comma))].push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw InvalidArgument("photon CSV line " + std::to_string(lineno) + ": malformed number");
    }
  }
  std::vector<PhotonRecord> out;
  for (auto& [det, arrivals] : groups) {
    std::sort(arrivals.begin(), arrivals.end());
    PhotonRecord rec;
    rec.detuning = det;
    rec.window_start = std::isfinite(window_start) ? window_start : std::min(arrivals.front(), 0.0);
    rec.window_end = std::isfinite(window_end) ? window_end : arrivals.back();
    rec.arrivals = std::move(arrivals);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_histogram_csv(std::ostream& os, const VelocityHistogram& h) {
  os << "v_lo,v_hi,raw,background,entries,density\n" << std::setprecision(10);
  const auto dens = h.density();
  for (std::size_t k = 0; k < h.hist.entries.size(); ++k)
    os << h.hist.edges[k] << ',' << h.hist.edges[k + 1] << ',' << h.hist.raw[k] << ',' << h.hist.background[k] << ','
       << h.hist.entries[k] << ',' << dens[k] << '\n';
}

}  // namespace sympcool::velocimetry
