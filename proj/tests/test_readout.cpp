#include <doctest.h>

#include <cmath>
#include <initializer_list>

#include "sympcool/error.hpp"
#include "sympcool/readout.hpp"

using namespace sympcool::readout;

TEST_CASE("Laguerre recurrence against arbitrary-precision values") {
  CHECK(laguerre(0, 0.3) == 1.0);
  CHECK(laguerre(1, 0.01) == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(laguerre(3, 0.5) == doctest::Approx(-0.1458333333333333).epsilon(1e-14));
  CHECK(laguerre(50, 0.04) == doctest::Approx(-0.2062221029922753).epsilon(1e-10));
  CHECK(laguerre(10, 0.09) == doctest::Approx(0.2682318410796165).epsilon(1e-12));
  CHECK(laguerre(200, 0.0009) == doctest::Approx(0.8279016778081314).epsilon(1e-10));
  CHECK(carrier_rabi(50, 0.2) == laguerre(50, 0.04));
}

TEST_CASE("scaled I0 on both sides of the series/asymptotic switch") {
  CHECK(bessel_i0_scaled(0.0) == 1.0);
  CHECK(bessel_i0_scaled(0.5) == doctest::Approx(0.6450352704491501).epsilon(1e-13));
  CHECK(bessel_i0_scaled(10.0) == doctest::Approx(0.1278333371634286).epsilon(1e-13));
  CHECK(bessel_i0_scaled(29.9) == doctest::Approx(0.07326921904600191).epsilon(1e-12));
  CHECK(bessel_i0_scaled(30.1) == doctest::Approx(0.07302329413106094).epsilon(1e-12));
  CHECK(bessel_i0_scaled(100.0) == doctest::Approx(0.03994437929909668).epsilon(1e-13));
  CHECK(bessel_i0_scaled(1000.0) == doctest::Approx(0.01261724045589126).epsilon(1e-13));
}

TEST_CASE("thermal mean-square coupling") {
  struct Ref {
    double nbar, eta, value;
  };
  // 40-digit closed-form values
  for (const Ref r : {Ref{0.1, 0.02, 0.9999200207985068}, Ref{5.0, 0.1, 0.9075539668530134},
                      Ref{50.0, 0.3, 0.1468517012525788}, Ref{30.0, 0.08, 0.7073257696054891}}) {
    const ThermalMotionalState s{r.nbar, r.eta};
    CHECK(thermal_mean_sq_rabi(s) == doctest::Approx(r.value).epsilon(1e-12));
    CHECK(thermal_mean_sq_rabi(s, MeanSquareForm::DirectSum) == doctest::Approx(r.value).epsilon(1e-10));
  }
  const ThermalMotionalState ground{0.0, 0.1};
  for (auto f : {MeanSquareForm::Exact, MeanSquareForm::Approx, MeanSquareForm::DirectSum})
    CHECK(thermal_mean_sq_rabi(ground, f) == doctest::Approx(1.0).epsilon(1e-15));
  const ThermalMotionalState s20{20.0, 0.1};
  CHECK(thermal_mean_sq_rabi(s20, MeanSquareForm::DirectSum) ==
        doctest::Approx(thermal_mean_sq_rabi(s20)).epsilon(1e-8));
}

TEST_CASE("closed form equals the direct sum over the whole grid") {
  double worst = 0.0;
  for (double nbar : {0.1, 0.3, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 50.0})
    for (double eta : {0.02, 0.05, 0.08, 0.1, 0.15, 0.2, 0.25, 0.3}) {
      const ThermalMotionalState s{nbar, eta};
      const double exact = thermal_mean_sq_rabi(s);
      const double direct = thermal_mean_sq_rabi(s, MeanSquareForm::DirectSum);
      worst = std::max(worst, std::abs(exact - direct) / exact);
    }
  CHECK(worst < 1e-8);
}

TEST_CASE("approximate closed form converges to the exact one at large nbar") {
  // fixed eta^2 nbar = 0.5
  double previous = 1.0;
  for (double nbar : {1.0, 4.0, 16.0, 64.0, 256.0}) {
    const ThermalMotionalState s{nbar, std::sqrt(0.5 / nbar)};
    const double gap = std::abs(thermal_mean_sq_rabi(s, MeanSquareForm::Approx) - thermal_mean_sq_rabi(s)) /
                       thermal_mean_sq_rabi(s);
    CHECK(gap < previous);
    previous = gap;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("pi-pulse excitation") {
  CHECK(pi_pulse_excitation({0.0, 0.1}) == doctest::Approx(1.0));
  CHECK(pi_pulse_excitation_exact({0.0, 0.1}) == doctest::Approx(1.0));
  const ThermalMotionalState s{30.0, 0.08};
  // thermal average of sin^2(pi L_n / 2) summed at 40 digits
  CHECK(pi_pulse_excitation_exact(s) == doctest::Approx(0.8846282140659893).epsilon(1e-9));
  CHECK(pi_pulse_excitation(s) == doctest::Approx(0.9389279384092338).epsilon(1e-12));
}

TEST_CASE("excitation decreases monotonically over the documented range") {
  for (double eta : {0.02, 0.03, 0.05, 0.08}) {
    const double limit = monotone_limit(eta, 2000.0);
    CHECK(limit > 100.0);
    double prev = 2.0;
    for (double nbar = 0.0; nbar <= std::min(limit, 500.0); nbar += 0.5) {
      const double p = pi_pulse_excitation({nbar, eta});
      CHECK(p < prev);
      prev = p;
    }
  }
}

TEST_CASE("inversion round-trips") {
  for (double eta : {0.03, 0.08})
    for (double nbar : {1.0, 5.0, 20.0}) {
      const auto r = invert_excitation(pi_pulse_excitation({nbar, eta}), eta);
      CHECK_FALSE(r.saturated);
      CHECK(r.nbar == doctest::Approx(nbar).epsilon(1e-3 / nbar));
    }
  CHECK(invert_excitation(1.0, 0.05).nbar == 0.0);
  const auto sat = invert_excitation(0.0, 0.05, {0.0, 100.0});
  CHECK(sat.saturated);
  CHECK(sat.nbar == 100.0);
}

TEST_CASE("state validation") {
  CHECK_THROWS_AS((ThermalMotionalState{-1.0, 0.1}.validate()), sympcool::InvalidArgument);
  CHECK_THROWS_AS((ThermalMotionalState{1.0, 1.0}.validate()), sympcool::InvalidArgument);
  CHECK_THROWS_AS((ThermalMotionalState{NAN, 0.1}.validate()), sympcool::InvalidArgument);
  CHECK(ThermalMotionalState{1.0, 0.1}.z() == doctest::Approx(0.5));
}
