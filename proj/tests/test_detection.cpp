#include <doctest.h>

#include <initializer_list>
#include <sstream>

#include "sympcool/constants.hpp"
#include "sympcool/detection.hpp"
#include "sympcool/error.hpp"

using namespace sympcool;
using namespace sympcool::readout;

namespace {

const double kEv = constants::kElectronVolt;

/// Energy falling at a constant rate: `heating` phonons deposited in every waiting window.
EnergyProfile constant_heating(double heating, const DetectionProtocol& p) {
  const double rate = heating * 3.0 * constants::kHbar * p.readout_omega / p.wait();
  return {[rate](double t) { return -rate * t; }, 1e9};
}

EnergyProfile no_ion() {
  return {[](double) { return 0.0; }, 0.0};
}

models::AnalyticModelParams al_ca(double e0_ev) {
  return models::AnalyticModelParams::from_si(27.0, 40.0, 2 * constants::kPi * 1e6, e0_ev * kEv);
}

double mean_heating(const EnergyAnalysis& a) {
  double s = 0.0;
  for (const auto& b : a.bins) s += b.nbar;
  return s / static_cast<double>(a.bins.size());
}

}  // namespace

TEST_CASE("per-cycle phonon number") {
  DetectionProtocol p;
  CHECK(cycle_nbar(no_ion(), p, 0.0, p.wait()) == doctest::Approx(p.doppler_nbar));
  CHECK(cycle_nbar(constant_heating(25.0, p), p, 3.0, p.wait()) == doctest::Approx(p.doppler_nbar + 25.0));
  CHECK(cycle_nbar(constant_heating(25.0, p), p, 3.0, 0.0) == doctest::Approx(p.doppler_nbar));
  p.ambient_rate = 200.0;
  CHECK(cycle_nbar(no_ion(), p, 0.0, p.wait()) == doctest::Approx(p.doppler_nbar + 2.0));
  CHECK(excitation_probability(0.0, p) == doctest::Approx(1.0));
}

TEST_CASE("protocol validation") {
  DetectionProtocol p;
  p.wait_ms = 30.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.eta = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  std::vector<DetectionCycleRecord> few(100, DetectionCycleRecord{0.0, 0.01, true, false});
  CHECK_THROWS_AS(estimate_energy(few, 49, DetectionProtocol{}), InvalidArgument);
}

TEST_CASE("synthesized stream layout") {
  DetectionProtocol p;
  p.interleave_control = true;
  std::mt19937_64 rng(1);
  const auto c = synthesize_signal(no_ion(), p, 10, rng);
  REQUIRE(c.size() == 10);
  for (std::size_t k = 0; k < c.size(); ++k) {
    CHECK(c[k].t == doctest::Approx(k * p.period()));
    CHECK(c[k].control == (k % 2 == 1));
    CHECK(c[k].wait == doctest::Approx(c[k].control ? 0.0 : p.wait()));
  }
}

TEST_CASE("estimator is consistent at 1e5 cycles") {
  DetectionProtocol p;
  for (auto [eta, heating] : {std::pair{0.05, 300.0}, std::pair{0.1, 20.0}}) {
    p.eta = eta;
    std::mt19937_64 rng(1);
    const auto c = synthesize_signal(constant_heating(heating, p), p, 100000, rng);
    const auto a = estimate_energy(c, 100000, p);
    REQUIRE(a.bins.size() == 1);
    CHECK(a.bins[0].p_hat == doctest::Approx(excitation_probability(heating + p.doppler_nbar, p)).epsilon(0.01));
    CHECK(std::abs(a.bins[0].nbar / heating - 1.0) < 0.02);
    CHECK(a.bins[0].nbar_lo <= a.bins[0].nbar);
    CHECK(a.bins[0].nbar_hi >= a.bins[0].nbar);
  }
}

TEST_CASE("larger bins overestimate the heating rate less") {
  // mid-range excitation (p ~ 0.45), where projection noise biases the inverse upwards
  DetectionProtocol p;
  const double heating = 2000.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::mt19937_64 rng(seed);
    const auto c = synthesize_signal(constant_heating(heating, p), p, 50000, rng);
    const double b50 = mean_heating(estimate_energy(c, 50, p)) / heating - 1.0;
    const double b250 = mean_heating(estimate_energy(c, 250, p)) / heating - 1.0;
    CHECK(b50 > 0.0);
    CHECK(b250 < b50);
  }
}

TEST_CASE("no hot ion leaves only a noise floor") {
  DetectionProtocol p;
  std::mt19937_64 rng(4);
  const auto a = estimate_energy(synthesize_signal(no_ion(), p, 9000, rng), 250, p);
  CHECK(a.total_energy() < 3e-3 * kEv);
  CHECK(a.saturated_bins == 0);
}

TEST_CASE("a transient load deposits two orders of magnitude less than a full event") {
  DetectionProtocol p;
  std::mt19937_64 rng(2);
  const auto full = estimate_energy(synthesize_signal(profile_from_model(al_ca(1.0), 20.0), p, 280000, rng), 250, p);
  const auto brief = estimate_energy(synthesize_signal(profile_from_model(al_ca(1.0), 20.0, 40.0), p, 5000, rng), 250, p);
  CHECK(brief.total_energy() > 0.0);
  CHECK(brief.total_energy() < 0.01 * full.total_energy());
}

TEST_CASE("energy profiles") {
  const auto prm = al_ca(0.3);
  const auto prof = profile_from_model(prm, 20.0);
  CHECK(prof.energy(0.0) == doctest::Approx(prm.initial_energy));
  CHECK(prof.energy(20.0 + 1.0) < prm.initial_energy);
  CHECK(prof.energy(1e6) == doctest::Approx(prm.scales.energy));
  const auto lost = profile_from_model(prm, 20.0, 10.0);
  CHECK(lost.energy(31.0) == doctest::Approx(lost.energy(1e4)));

  models::CoolingCurve curve;
  curve.points = {{0.0, 2.0}, {1.0, 1.0}, {3.0, 0.0}};
  const auto lin = profile_from_curve(curve, 5.0);
  CHECK(lin.energy(5.5) == doctest::Approx(1.5));
  CHECK(lin.energy(7.0) == doctest::Approx(0.5));
  CHECK(lin.energy(100.0) == doctest::Approx(0.0));
}

TEST_CASE("binned estimates are ordered and non-negative") {
  DetectionProtocol p;
  std::mt19937_64 rng(9);
  const auto c = synthesize_signal(profile_from_model(al_ca(0.3), 20.0), p, 9000, rng);
  const auto a = estimate_energy(c, 250, p);
  REQUIRE(a.bins.size() == 36);
  for (std::size_t k = 0; k < a.bins.size(); ++k) {
    CHECK(a.bins[k].E_excess >= 0.0);
    CHECK(a.bins[k].p_lo <= a.bins[k].p_hat);
    CHECK(a.bins[k].p_hat <= a.bins[k].p_hi);
    if (k > 0) CHECK(a.bins[k].E_excess <= a.bins[k - 1].E_excess);
  }
}

TEST_CASE("cycle CSV round trip") {
  DetectionProtocol p;
  p.interleave_control = true;
  std::mt19937_64 rng(3);
  const auto c = synthesize_signal(profile_from_model(al_ca(0.3), 1.0), p, 400, rng);
  std::stringstream ss;
  ss << "# comment\n";
  write_cycles_csv(ss, c);
  const auto back = read_cycles_csv(ss);
  REQUIRE(back.size() == c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    CHECK(back[k].t == doctest::Approx(c[k].t));
    CHECK(back[k].wait == doctest::Approx(c[k].wait));
    CHECK(back[k].outcome == c[k].outcome);
    CHECK(back[k].control == c[k].control);
  }
  std::stringstream bad("t,wait,outcome\n");
  CHECK_THROWS_AS(read_cycles_csv(bad), InvalidArgument);
}
