#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sympcool/analytic.hpp"
#include "sympcool/ensemble.hpp"
#include "sympcool/error.hpp"

using namespace sympcool;
using namespace sympcool::ensemble;

namespace {

EnsembleSpec small_spec() {
  EnsembleSpec s;
  s.e0_grid = {10.0, 20.0};
  s.trials_per_point = 6;
  s.seed = 42;
  return s;
}

}  // namespace

TEST_CASE("seed derivation") {
  // first output of the reference splitmix64 generator seeded with 0
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(trial_seed(1, 0, 0) == trial_seed(1, 0, 0));
  CHECK(trial_seed(1, 0, 1) != trial_seed(1, 1, 0));
  CHECK(trial_seed(1, 2, 3) != trial_seed(2, 2, 3));
}

TEST_CASE("thermal draw has the requested mean energy, evenly split over axes") {
  const dynamics::IonSystem sys(dynamics::aluminium27(), {dynamics::calcium40()}, dynamics::default_trap());
  std::mt19937_64 rng(17);
  const double e0 = 30.0;
  const std::size_t n = 10000;
  double total = 0.0;
  Vec3 axes{};
  for (std::size_t k = 0; k < n; ++k) {
    const auto s = sample_initial(sys, e0, rng);
    total += hot_oscillator_energy(sys, s);
    axes += sys.axis_energies(0, s.positions[0], s.velocities[0]);
    // cold ion starts at rest in its own crystal
    CHECK(norm(s.velocities[1]) == 0.0);
  }
  CHECK(total / n == doctest::Approx(e0).epsilon(0.02));
  for (std::size_t i = 0; i < 3; ++i) CHECK(axes[i] / n == doctest::Approx(e0 / 3).epsilon(0.02));
}

TEST_CASE("percentiles interpolate linearly") {
  CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
  CHECK(percentile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.1) == doctest::Approx(1.4));
  CHECK(percentile({7.0}, 0.9) == 7.0);
  CHECK_THROWS_AS(percentile({}, 0.5), InvalidArgument);
}

TEST_CASE("summary counts every verdict") {
  std::vector<TrialResult> t(5);
  for (std::size_t k = 0; k < 3; ++k) {
    t[k].status = TrialStatus::Done;
    t[k].outcome = dynamics::Outcome::Crystallized;
    t[k].t_cool_periods = 10.0 * (k + 1);
  }
  t[3].status = TrialStatus::Done;
  t[3].outcome = dynamics::Outcome::TimedOut;
  t[4].status = TrialStatus::Failed;
  const auto s = summarize(t);
  CHECK(s.crystallized == 3);
  CHECK(s.timed_out == 1);
  CHECK(s.failed == 1);
  CHECK(s.mean == doctest::Approx(20.0));
  CHECK(s.median == doctest::Approx(20.0));
  CHECK(s.timed_out_fraction() == doctest::Approx(0.2));
  CHECK(t[4].verdict() == "failed");
}

TEST_CASE("ensemble results do not depend on the worker count") {
  const auto spec = small_spec();
  RunOptions one;
  one.workers = 1;
  RunOptions many;
  many.workers = 4;
  const auto a = run_ensemble(spec, one);
  const auto b = run_ensemble(spec, many);
  REQUIRE(a.complete());
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t p = 0; p < a.points.size(); ++p) {
    CHECK(a.points[p].stats.model_prediction ==
          doctest::Approx(models::scaled::simple_cooling_time(spec.e0_grid[p], 27.0, 40.0)));
    for (std::size_t k = 0; k < spec.trials_per_point; ++k) {
      CHECK(a.points[p].trials[k].seed == b.points[p].trials[k].seed);
      CHECK(a.points[p].trials[k].t_cool_periods == b.points[p].trials[k].t_cool_periods);
      CHECK(a.points[p].trials[k].verdict() == b.points[p].trials[k].verdict());
    }
  }
}

TEST_CASE("resume reuses finished trials and runs only the missing ones") {
  const auto spec = small_spec();
  const auto full = run_ensemble(spec);
  std::stringstream csv;
  write_scatter_csv(csv, full);
  std::string text = csv.str();
  // drop the last row
  text.erase(text.find_last_of('\n', text.size() - 2) + 1);
  std::istringstream in(text);

  RunOptions opts;
  opts.previous = read_scatter_csv(in, spec);
  CHECK(opts.previous.size() == 2 * spec.trials_per_point - 1);
  std::size_t reran = 0;
  opts.on_trial = [&](std::size_t, std::size_t, const TrialResult&) { ++reran; };
  const auto resumed = run_ensemble(spec, opts);
  CHECK(reran == 1);
  for (std::size_t p = 0; p < full.points.size(); ++p)
    for (std::size_t k = 0; k < spec.trials_per_point; ++k)
      CHECK(resumed.points[p].trials[k].t_cool_periods ==
            doctest::Approx(full.points[p].trials[k].t_cool_periods).epsilon(1e-9));
}

TEST_CASE("cancellation leaves trials pending") {
  std::atomic<bool> stop{true};
  RunOptions opts;
  opts.cancel = &stop;
  const auto r = run_ensemble(small_spec(), opts);
  CHECK_FALSE(r.complete());
  CHECK(r.points[0].stats.pending == small_spec().trials_per_point);
}

TEST_CASE("spec validation and time limits") {
  auto s = small_spec();
  CHECK(s.t_max_at(10.0) == doctest::Approx(200.0 * models::scaled::simple_cooling_time(10.0, 27.0, 40.0)));
  s.t_max_periods = 123.0;
  CHECK(s.t_max_at(10.0) == 123.0);
  s.e0_grid = {0.5};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
}

TEST_CASE("equal-mass probe conserves energy and exchanges it along an axis") {
  std::mt19937_64 rng(1);
  const auto r = equal_mass_exchange_probe(100.0, 2, 1500.0, rng);
  CHECK(r.initial_energy == doctest::Approx(100.0));
  CHECK(r.energy_drift < 1e-6);
  CHECK(r.peaks >= 2);
  CHECK(r.exchange_time == doctest::Approx(0.5 * r.period));
  CHECK(r.predicted_exchange == doctest::Approx(models::scaled::exchange_time(100.0)).epsilon(1e-9));
  CHECK_THROWS_AS(equal_mass_exchange_probe(100.0, 2, 10.0, rng, dynamics::default_trap(0.01)), InvalidArgument);
}
