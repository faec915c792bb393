#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "sympcool/dop853_tableau.hpp"
#include "sympcool/error.hpp"

namespace sympcool {

struct StepControl {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double safety = 0.9;
  double min_factor = 0.333;  // smallest allowed h_new / h
  double max_factor = 6.0;    // largest allowed h_new / h
  double beta = 0.04;         // PI (Lund) stabilisation exponent
  double max_step = std::numeric_limits<double>::infinity();
};

/// Adaptive explicit Runge-Kutta integrator of order 8 with the combined 5th/3rd-order
/// embedded error estimate of DOP853 and a PI step-size controller.
///
/// `Rhs` is callable as rhs(t, y, dydt) with spans of length n.
template <class Rhs>
class Dop853 {
 public:
  Dop853(Rhs rhs, std::size_t n, StepControl control = {})
      : rhs_(std::move(rhs)), n_(n), control_(control), y_(n), y_new_(n), tmp_(n), k_((dop853::kStages + 1) * n) {
    if (!(control_.rel_tol > 0.0) || !(control_.abs_tol > 0.0))
      throw InvalidArgument("integrator tolerances must be positive");
  }

  void initialize(double t, std::span<const double> y, double h0 = 0.0) {
    t_ = t;
    std::copy(y.begin(), y.end(), y_.begin());
    rhs_(t_, std::span<const double>(y_), stage(0));
    h_ = h0 > 0.0 ? h0 : initial_step();
    err_old_ = 1e-4;
    accepted_ = rejected_ = 0;
  }

  /// Takes one accepted step that does not pass `t_limit`. Returns the step length taken.
  double step(double t_limit) {
    using namespace dop853;
    const double remaining = t_limit - t_;
    if (!(remaining > 0.0)) throw InvalidArgument("step target must lie ahead of the current time");

    bool last_rejected = false;
    for (;;) {
      double h = std::min(h_, control_.max_step);
      bool clamped = false;
      if (h >= remaining) {
        h = remaining;
        clamped = true;
      }
      const double min_step = 10.0 * std::abs(std::nextafter(t_, t_limit) - t_);
      if (h < min_step) throw NumericalError("step size underflow");

      attempt(h);
      const double err = error_norm(h);
      if (err <= 1.0) {
        double factor;
        if (err == 0.0) {
          factor = control_.max_factor;
        } else {
          factor = control_.safety * std::pow(err, -(0.125 - 0.2 * control_.beta)) *
                   std::pow(err_old_, control_.beta);
          factor = std::clamp(factor, control_.min_factor, control_.max_factor);
        }
        if (last_rejected) factor = std::min(factor, 1.0);
        err_old_ = std::max(err, 1e-4);

        t_ = clamped ? t_limit : t_ + h;
        std::swap(y_, y_new_);
        // FSAL: the derivative at the new point becomes stage 0.
        std::copy_n(stage(kStages).begin(), n_, stage(0).begin());
        const double proposal = h * factor;
        h_ = clamped ? std::max(h_, proposal) : proposal;
        ++accepted_;
        return h;
      }
      ++rejected_;
      last_rejected = true;
      const double factor = std::max(control_.min_factor, control_.safety * std::pow(err, -0.125));
      h_ = h * factor;
    }
  }

  double time() const { return t_; }
  std::span<const double> state() const { return y_; }
  std::span<const double> derivative() const { return std::span<const double>(k_.data(), n_); }
  double proposed_step() const { return h_; }
  std::size_t accepted_steps() const { return accepted_; }
  std::size_t rejected_steps() const { return rejected_; }

 private:
  std::span<double> stage(std::size_t s) { return std::span<double>(k_.data() + s * n_, n_); }
  std::span<const double> stage(std::size_t s) const { return std::span<const double>(k_.data() + s * n_, n_); }

  void attempt(double h) {
    using namespace dop853;
    for (int s = 1; s < kStages; ++s) {
      for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < s; ++j) acc += kA[s][j] * k_[j * n_ + i];
        tmp_[i] = y_[i] + h * acc;
      }
      rhs_(t_ + kC[s] * h, std::span<const double>(tmp_), stage(s));
    }
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (int j = 0; j < kStages; ++j) acc += kB[j] * k_[j * n_ + i];
      y_new_[i] = y_[i] + h * acc;
    }
    rhs_(t_ + h, std::span<const double>(y_new_), stage(kStages));
  }

  double error_norm(double h) const {
    using namespace dop853;
    double err5 = 0.0;
    double err3 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double scale = control_.abs_tol + control_.rel_tol * std::max(std::abs(y_[i]), std::abs(y_new_[i]));
      double e5 = 0.0;
      double e3 = 0.0;
      for (int j = 0; j < kStages; ++j) {
        e5 += kE5[j] * k_[j * n_ + i];
        e3 += kE3[j] * k_[j * n_ + i];
      }
      e5 /= scale;
      e3 /= scale;
      err5 += e5 * e5;
      err3 += e3 * e3;
    }
    if (err5 == 0.0 && err3 == 0.0) return 0.0;
    const double denom = err5 + 0.01 * err3;
    const double err = std::abs(h) * err5 / std::sqrt(denom * static_cast<double>(n_));
    return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
  }

  // Hairer's starting-step heuristic.
  double initial_step() {
    auto rms = [this](std::span<const double> v, std::span<const double> ref) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double s = control_.abs_tol + control_.rel_tol * std::abs(ref[i]);
        acc += (v[i] / s) * (v[i] / s);
      }
      return std::sqrt(acc / static_cast<double>(n_));
    };
    const double d0 = rms(y_, y_);
    const double d1 = rms(stage(0), y_);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, control_.max_step);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y_[i] + h0 * k_[i];
    rhs_(t_ + h0, std::span<const double>(tmp_), stage(1));
    std::vector<double> diff(n_);
    for (std::size_t i = 0; i < n_; ++i) diff[i] = (k_[n_ + i] - k_[i]) / h0;
    const double d2 = rms(diff, y_);
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                : std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
    return std::min({100.0 * h0, h1, control_.max_step});
  }

  Rhs rhs_;
  std::size_t n_;
  StepControl control_;
  double t_ = 0.0;
  double h_ = 0.0;
  double err_old_ = 1e-4;
  std::vector<double> y_, y_new_, tmp_;
  std::vector<double> k_;
  std::size_t accepted_ = 0, rejected_ = 0;
};

}  // namespace sympcool
