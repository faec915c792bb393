#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "sympcool/error.hpp"
#include "sympcool/velocimetry.hpp"

using namespace sympcool;
using namespace sympcool::velocimetry;

namespace {

GeneratorConfig signal_only(double mode, TransitionMode transition, std::size_t photons = 200000) {
  GeneratorConfig g;
  g.plume.mode_velocity = mode;
  g.plume.spread = 0.3 * mode;
  g.plume.transition = transition;
  g.photons = photons;
  g.background_rate = 0.0;
  g.seed = 5;
  return g;
}

/// Pearson chi-square p-value of observed against expected counts, over bins with >= 20 expected.
double chi_square_p(const std::vector<double>& observed, const std::vector<double>& expected) {
  double chi2 = 0.0;
  std::size_t dof = 0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    if (expected[k] < 20.0) continue;
    chi2 += (observed[k] - expected[k]) * (observed[k] - expected[k]) / expected[k];
    ++dof;
  }
  REQUIRE(dof > 10);
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(static_cast<double>(dof)), chi2));
}

}  // namespace

TEST_CASE("time-of-flight and Doppler conversions") {
  const BeamGeometry g;
  CHECK(arrival_to_velocity(26e-6, g) == doctest::Approx(1000.0));
  CHECK(velocity_to_arrival(arrival_to_velocity(3.7e-6, g), g) == doctest::Approx(3.7e-6));
  // v cos(87.7 deg) / 394 nm at 4.5 km/s
  CHECK(doppler_resonance(4500.0, g) == doctest::Approx(458358036.5393878).epsilon(1e-12));
  CHECK(doppler_resonance(4500.0, g, 1e6) == doctest::Approx(458358036.5393878 + 1e6).epsilon(1e-12));
  CHECK_THROWS_AS(arrival_to_velocity(0.0, g), InvalidArgument);
  BeamGeometry bad;
  bad.angle_deg = 180.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("capture windows of the two gate settings") {
  const BeamGeometry g;
  PhotonRecord r{0.0, {-1e-5, 1e-6, 5e-6, 2e-5, 5e-5}, -2e-4, 2e-4};
  const auto slow = capture_window_filter({r}, g, 32e-6, 1e-3);
  CHECK(slow.v_max == doctest::Approx(812.5));
  CHECK(slow.records[0].arrivals == std::vector<double>{-1e-5, 5e-5});
  const auto fast = capture_window_filter({r}, g, 0.0, 7e-6);
  CHECK(fast.v_min == doctest::Approx(3714.285714285714));
  CHECK(std::isinf(fast.v_max));
  CHECK(fast.records[0].arrivals == std::vector<double>{-1e-5, 1e-6, 5e-6});
}

TEST_CASE("an open gate is the identity and filtering is idempotent") {
  auto cfg = signal_only(4500.0, TransitionMode::OpenTransition, 20000);
  cfg.background_rate = 2.5e8;
  const auto recs = generate_plume(cfg);
  const BeamGeometry g;
  const auto all = capture_window_filter(recs, g, 0.0, std::numeric_limits<double>::infinity());
  CHECK(all.records[0].arrivals == recs[0].arrivals);
  const auto once = capture_window_filter(recs, g, 4e-6, 6e-6);
  const auto twice = capture_window_filter(once.records, g, 4e-6, 6e-6);
  CHECK(once.records[0].arrivals == twice.records[0].arrivals);
}

TEST_CASE("background-only data is consistent with Poisson noise") {
  GeneratorConfig cfg;
  cfg.photons = 0;
  cfg.seed = 11;
  const auto recs = generate_plume(cfg);
  std::vector<double> edges;
  for (int k = 0; k <= 50; ++k) edges.push_back(4e-6 * k);
  const auto h = subtract_background(recs, edges, 0.0);
  CHECK(chi_square_p(h.raw, h.background) > 0.01);
  CHECK(h.background_rate == doctest::Approx(cfg.background_rate).epsilon(0.02));
}

TEST_CASE("counts are conserved exactly") {
  GeneratorConfig cfg;
  cfg.photons = 100000;
  cfg.prompt_photons = 5000;
  const auto recs = generate_plume(cfg);
  const BeamGeometry g;
  AnalysisOptions opt;
  for (auto mode : {TransitionMode::OpenTransition, TransitionMode::ClosedTransition}) {
    const auto v = velocity_distribution(recs, g, mode, opt);
    double sum = 0.0, raw = 0.0;
    for (std::size_t k = 0; k < v.hist.entries.size(); ++k) {
      sum += v.hist.entries[k];
      raw += v.hist.raw[k];
      CHECK(v.hist.entries[k] >= 0.0);
    }
    CHECK(v.hist.clip_mass <= 0.0);
    CHECK(sum == doctest::Approx(v.hist.raw_total - v.hist.background_total - v.hist.clip_mass).epsilon(1e-12));
    CHECK(raw == doctest::Approx(v.hist.raw_total).epsilon(1e-12));
    CHECK(sum == doctest::Approx(v.hist.total()).epsilon(1e-12));
  }
  // open transition: raw total is the number of photons inside the velocity range after the mask
  const auto v = velocity_distribution(recs, g, TransitionMode::OpenTransition, opt);
  std::size_t inside = 0;
  for (double tau : recs[0].arrivals)
    if (tau >= opt.prompt_mask && tau > g.d_target / opt.v_max && tau <= g.d_target / opt.v_min) ++inside;
  CHECK(v.hist.raw_total == static_cast<double>(inside));
}

TEST_CASE("uniform arrival times map to a 1/v^2 velocity density") {
  const BeamGeometry g;
  std::mt19937_64 rng(3);
  const double t0 = 2e-6, t1 = 100e-6;
  std::uniform_real_distribution<double> u(t0, t1);
  PhotonRecord r;
  r.window_start = -1e-4;
  r.window_end = 2e-4;
  for (int k = 0; k < 200000; ++k) r.arrivals.push_back(u(rng));
  std::sort(r.arrivals.begin(), r.arrivals.end());
  AnalysisOptions opt;
  opt.v_min = g.d_target / t1;
  opt.v_max = g.d_target / t0;
  opt.bins = 60;
  const auto h = velocity_distribution({r}, g, TransitionMode::OpenTransition, opt);
  std::vector<double> expected;
  const double rate = 200000.0 / (t1 - t0);
  for (std::size_t k = 0; k + 1 < h.hist.edges.size(); ++k)
    expected.push_back(rate * (g.d_target / h.hist.edges[k] - g.d_target / h.hist.edges[k + 1]));
  CHECK(chi_square_p(h.hist.entries, expected) > 0.01);
}

TEST_CASE("recovered distributions follow the plume model") {
  using boost::math::quadrature::gauss_kronrod;
  const BeamGeometry g;
  for (auto [mode, transition] : {std::pair{4500.0, TransitionMode::OpenTransition},
                                  std::pair{1600.0, TransitionMode::ClosedTransition}}) {
    const auto cfg = signal_only(mode, transition);
    const auto recs = generate_plume(cfg);
    AnalysisOptions opt;
    opt.prompt_mask = 0.0;
    opt.v_min = 300.0;
    opt.bins = 80;
    const auto h = velocity_distribution(recs, g, transition, opt);
    // closed lines: photon weights v undo the 1/v yield, so the histogram estimates the flux
    const auto target = [&](double v) { return cfg.plume.flux(v); };
    const double scale = h.hist.total() / gauss_kronrod<double, 61>::integrate(target, opt.v_min, opt.v_max, 20, 1e-12);
    std::vector<double> expected, observed;
    for (std::size_t k = 0; k + 1 < h.hist.edges.size(); ++k) {
      const double mass = scale * gauss_kronrod<double, 61>::integrate(target, h.hist.edges[k], h.hist.edges[k + 1], 10, 1e-12);
      // compare in photon units: divide the weighted content by the mean weight of the bin
      const double w = transition == TransitionMode::OpenTransition ? 1.0 : std::sqrt(h.hist.edges[k] * h.hist.edges[k + 1]);
      expected.push_back(mass / w);
      observed.push_back(h.hist.entries[k] / w);
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < expected.size(); ++k)
      if (expected[k] > 2000.0) worst = std::max(worst, std::abs(observed[k] / expected[k] - 1.0));
    CHECK(worst < 0.05);
    CHECK(peak_velocity(h) == doctest::Approx(mode).epsilon(0.05));
  }
}

TEST_CASE("plume model shape") {
  PlumeModel m;
  CHECK(m.drift() == doctest::Approx(m.mode_velocity - 3 * m.spread * m.spread / m.mode_velocity));
  // the flux peaks at the modal speed
  CHECK(m.flux(m.mode_velocity) > m.flux(m.mode_velocity * 1.01));
  CHECK(m.flux(m.mode_velocity) > m.flux(m.mode_velocity * 0.99));
  m.transition = TransitionMode::ClosedTransition;
  CHECK(m.photon_density(2000.0) == doctest::Approx(m.flux(2000.0) / 2000.0));
}

TEST_CASE("line selection keeps resonant photons and the background window") {
  const BeamGeometry g;
  const double tau = 10e-6;
  const double det = doppler_resonance(arrival_to_velocity(tau, g), g);
  PhotonRecord r{det, {-5e-6, tau, 30e-6}, -1e-4, 1e-4};
  const auto sel = select_line({r}, g, 0.0, 1e6);
  CHECK(sel[0].arrivals == std::vector<double>{-5e-6, tau});
}

TEST_CASE("photon CSV round trip and errors") {
  GeneratorConfig cfg;
  cfg.photons = 1000;
  cfg.detunings = {0.0, 5e7};
  const auto recs = generate_plume(cfg);
  REQUIRE(recs.size() == 2);
  std::stringstream ss;
  write_photons_csv(ss, recs);
  const auto back = read_photons_csv(ss, cfg.window_start, cfg.window_end);
  REQUIRE(back.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back[k].detuning == recs[k].detuning);
    REQUIRE(back[k].arrivals.size() == recs[k].arrivals.size());
    for (std::size_t j = 0; j < recs[k].arrivals.size(); ++j)
      CHECK(back[k].arrivals[j] == doctest::Approx(recs[k].arrivals[j]).epsilon(1e-12));
  }
  std::stringstream bad("a,b\n1,2\n");
  CHECK_THROWS_AS(read_photons_csv(bad), InvalidArgument);
  PhotonRecord no_pre{0.0, {1e-6}, 0.0, 1e-4};
  CHECK_THROWS_AS(estimate_background({no_pre}), InvalidArgument);
}
