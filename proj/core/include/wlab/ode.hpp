#pragma once

// Adaptive RK4 (step doubling with local extrapolation). The right-hand side
// may veto a step (divisor guards); the after-step callback may adjust the
// state (fiber re-projection) or stop the integration.

#include <algorithm>
#include <cmath>
#include <functional>

#include "wlab/errors.hpp"
#include "wlab/linalg.hpp"

namespace wlab {

enum class OdeOutcome { ReachedEnd, Stopped, StepCollapse, RhsFailed };

struct OdeOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double h_init = 1e-3;
  double h_min = 1e-12;
  double h_max = 0.25;
  long max_steps = 200000;
};

namespace detail_ode {

// single classical RK4 step; returns false if the RHS vetoed
template <class F>
bool rk4_step(F& f, double t, double h, const Vec& y, Vec& out) {
  const size_t n = y.size();
  Vec k1(n), k2(n), k3(n), k4(n), tmp(n);
  if (!f(t, y, k1)) return false;
  for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  if (!f(t + 0.5 * h, tmp, k2)) return false;
  for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  if (!f(t + 0.5 * h, tmp, k3)) return false;
  for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  if (!f(t + h, tmp, k4)) return false;
  out.resize(n);
  for (size_t i = 0; i < n; ++i) out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return true;
}

}  // namespace detail_ode

// integrates dy/dt = f(t, y) from t0 toward t1 (either direction);
// f(t, y, dy) -> bool, after_step(t, y&) -> bool (false stops early)
template <class F, class Cb>
OdeOutcome integrate_rk4(F&& f, double t0, double t1, Vec& y, const OdeOptions& opt, Cb&& after_step) {
  double t = t0;
  const double dir = (t1 >= t0) ? 1.0 : -1.0;
  double h = std::min(opt.h_init, std::abs(t1 - t0)) * dir;
  if (h == 0.0) return OdeOutcome::ReachedEnd;

  Vec y_big, y_half, y_two;
  for (long step = 0; step < opt.max_steps; ++step) {
    if ((t - t1) * dir >= 0.0) return OdeOutcome::ReachedEnd;
    if (std::abs(h) > std::abs(t1 - t)) h = t1 - t;

    bool ok = detail_ode::rk4_step(f, t, h, y, y_big) &&
              detail_ode::rk4_step(f, t, 0.5 * h, y, y_half) &&
              detail_ode::rk4_step(f, t + 0.5 * h, 0.5 * h, y_half, y_two);
    if (!ok) {
      h *= 0.5;
      if (std::abs(h) < opt.h_min) return OdeOutcome::RhsFailed;
      continue;
    }

    double err = 0.0, scale = opt.abs_tol;
    for (size_t i = 0; i < y.size(); ++i) {
      err = std::max(err, std::abs(y_big[i] - y_two[i]));
      scale = std::max(scale, opt.rel_tol * std::abs(y_two[i]));
    }
    err /= 15.0;

    if (err <= scale) {
      for (size_t i = 0; i < y.size(); ++i) y[i] = y_two[i] + (y_two[i] - y_big[i]) / 15.0;
      t += h;
      if (!after_step(t, y)) return OdeOutcome::Stopped;
      double grow = err > 0 ? 0.9 * std::pow(scale / err, 0.2) : 2.0;
      h *= std::clamp(grow, 0.2, 2.0);
      if (std::abs(h) > opt.h_max) h = opt.h_max * dir;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(scale / err, 0.25));
    }
    if (std::abs(h) < opt.h_min) return OdeOutcome::StepCollapse;
  }
  return OdeOutcome::StepCollapse;
}

}  // namespace wlab
