#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "sympcool/analytic.hpp"
#include "sympcool/constants.hpp"
#include "sympcool/error.hpp"

using namespace sympcool;
using namespace sympcool::models;

namespace {

const double kW = 2.0 * constants::kPi * 1e6;
const double kEv = constants::kElectronVolt;

AnalyticModelParams al_ca(double e0_ev) { return AnalyticModelParams::from_si(27.0, 40.0, kW, e0_ev * kEv); }
AnalyticModelParams al_al(double e0_ev) { return AnalyticModelParams::from_si(27.0, 27.0, kW, e0_ev * kEv); }

}  // namespace

TEST_CASE("momentum kick against the integrated Coulomb force") {
  const double b = 1e-6, v = 100.0;
  const auto force = [&](double t) { return constants::kCoulomb * b / std::pow(b * b + v * v * t * t, 1.5); };
  const double t_max = 1e4 * b / v;
  const double quad = 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(force, 0.0, t_max, 30, 1e-12);
  CHECK(momentum_kick(b, v) == doctest::Approx(quad).epsilon(1e-3));
  // 40-digit reference of the closed form
  CHECK(momentum_kick(b, v) == doctest::Approx(4.614155104683473e-24).epsilon(1e-12));
  CHECK(momentum_kick(2 * b, v) == doctest::Approx(0.5 * momentum_kick(b, v)));
  CHECK(momentum_kick(2 * b, v / 2) == doctest::Approx(momentum_kick(b, v)));
  const double m = 27.0;
  CHECK(momentum_kick_from_angular_momentum(m * constants::kAtomicMassUnit * b * v, m) ==
        doctest::Approx(momentum_kick(b, v)));
}

TEST_CASE("simple model") {
  const auto p = al_ca(1.0);
  CHECK(simple_cooling_time(p) == doctest::Approx(5389.508694318251).epsilon(1e-10));
  CHECK(simple_cooling_time(al_ca(0.1)) == doctest::Approx(5.389508694318251).epsilon(1e-10));

  const double ed = p.scales.energy;
  const double at_ed = simple_energy_loss_rate(ed * (1 + 1e-12), p);
  CHECK(at_ed == doctest::Approx(-(kW / (2 * constants::kPi)) * 8.0 * 27.0 / 40.0 * ed).epsilon(1e-9));
  CHECK(simple_energy_loss_rate(2 * kEv, p) / simple_energy_loss_rate(kEv, p) == doctest::Approx(0.25));
  CHECK_THROWS_AS(simple_energy_loss_rate(ed, p), OutOfRegime);

  const double ratio = ed / p.initial_energy;
  CHECK(simple_energy_at(simple_cooling_time(p) * (1 - ratio * ratio * ratio), p) == doctest::Approx(ed).epsilon(1e-8));
  CHECK(simple_energy_at(0.0, p) == doctest::Approx(p.initial_energy));

  const auto curve = simple_cooling_curve(p, 64);
  REQUIRE(curve.points.size() == 64);
  for (std::size_t k = 1; k < curve.points.size(); ++k) CHECK(curve.points[k].energy < curve.points[k - 1].energy);
  CHECK(curve.points.back().energy == doctest::Approx(ed).epsilon(1e-6));
}

TEST_CASE("phonon rate scale") {
  const auto p = al_ca(1.0);
  CHECK(phonon_rate_estimate(kEv, p.scales) == doctest::Approx(3692.571466926204).epsilon(1e-10));
  CHECK(phonon_gain_rate(kEv, p, 2 * constants::kPi * 2e6) > 0.0);
}

TEST_CASE("refined model") {
  // E0/E_d = 50, m_h = 27, m_c = 40: 40-digit quadrature reference, periods
  CHECK(scaled::refined_cooling_time(50.0, 27.0, 40.0, 1e-12) == doctest::Approx(1558.656091185001).epsilon(1e-8));
  CHECK(scaled::refined_cooling_time(100.0, 27.0, 40.0) < scaled::simple_cooling_time(100.0, 27.0, 40.0));
  for (double e : {5.0, 10.0, 20.0, 40.0, 60.0})
    CHECK(scaled::refined_cooling_time(e, 27.0, 40.0) <= scaled::simple_cooling_time(e, 27.0, 40.0));

  // rates cross where (3/2) log(E / cbrt2) = 1
  const double cross = std::cbrt(2.0) * std::exp(2.0 / 3.0);
  CHECK(scaled::refined_cooling_rate(cross, 27, 40) == doctest::Approx(scaled::simple_energy_loss_rate(cross, 27, 40)));
  CHECK_THROWS_AS(scaled::refined_cooling_rate(std::cbrt(2.0), 27, 40), OutOfRegime);

  const auto curve = refined_cooling_curve(al_ca(0.01), 32);
  for (std::size_t k = 1; k < curve.points.size(); ++k) CHECK(curve.points[k].energy < curve.points[k - 1].energy);
}

TEST_CASE("SI and scaled forms agree") {
  const auto p = al_ca(0.01);
  const double e = p.e0_over_ed();
  CHECK(simple_cooling_time(p) / p.scales.tau == doctest::Approx(scaled::simple_cooling_time(e, 27, 40)).epsilon(1e-12));
  CHECK(refined_cooling_time(p) / p.scales.tau == doctest::Approx(scaled::refined_cooling_time(e, 27, 40)).epsilon(1e-8));
  const double rate_si = simple_energy_loss_rate(p.initial_energy, p) * p.scales.tau / p.scales.energy;
  CHECK(rate_si == doctest::Approx(scaled::simple_energy_loss_rate(e, 27, 40)).epsilon(1e-12));
  const auto q = AnalyticModelParams::from_scaled(27.0, 40.0, kW, e);
  CHECK(q.initial_energy == doctest::Approx(p.initial_energy).epsilon(1e-12));

  const auto s = al_al(0.01);
  CHECK(exchange_time(s) / s.scales.tau == doctest::Approx(scaled::exchange_time(s.e0_over_ed())).epsilon(1e-12));
}

TEST_CASE("equal-mass exchange") {
  CHECK(exchange_time(al_al(1.0)) == doctest::Approx(0.1044689193300785).epsilon(1e-10));
  CHECK(scaled::exchange_time(8 * 30.0) / scaled::exchange_time(30.0) == doctest::Approx(std::pow(8.0, 1.5)));
  CHECK(scaled::exchange_frequency(1.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(scaled::exchange_frequency(1.0, ExchangeForm::MeanField), OutOfRegime);
  CHECK(scaled::exchange_frequency(10.0, ExchangeForm::MeanField) ==
        doctest::Approx(scaled::exchange_frequency(10.0)).epsilon(1e-3));

  // pi / dw at the amplitude r(E0) reproduces the closed form
  const auto p = al_al(1.0);
  const double dw = exchange_frequency_at_energy(p.initial_energy, p);
  CHECK(constants::kPi / dw == doctest::Approx(exchange_time(p)).epsilon(1e-10));
  CHECK_THROWS_AS(exchange_time(al_ca(1.0)), InvalidArgument);
  CHECK(orbit_inverse_cube_average(1.0) == doctest::Approx(1.0));
}

TEST_CASE("model parameters are validated") {
  CHECK_THROWS(AnalyticModelParams::from_si(27.0, 40.0, kW, 1e-30).validate());
  CHECK_THROWS(AnalyticModelParams::from_si(-1.0, 40.0, kW, kEv).validate());
}
