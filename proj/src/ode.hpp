#pragma once

// Explicit Runge-Kutta integrators over flat state buffers.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "jumpflow/dynamics.hpp"
#include "jumpflow/errors.hpp"

namespace jumpflow::detail {

inline double guarded_norm(std::span<const double> y, std::size_t guard_dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < guard_dim; ++i) s += y[i] * y[i];
  return std::sqrt(s);
}

inline void check_state(std::span<const double> y, std::size_t guard_dim, const IntegratorConfig& cfg,
                        double t) {
  for (double v : y)
    if (!std::isfinite(v))
      throw NumericError("non-finite state at t=" + std::to_string(t) + " (dissipativity violated?)");
  if (guard_dim > 0 && guarded_norm(y, guard_dim) > cfg.blowup_norm)
    throw NumericError("state norm exceeded " + std::to_string(cfg.blowup_norm) + " at t=" +
                       std::to_string(t) + " (blow-up)");
}

/// Integrates y' = rhs(t, y) from t0 to t1 in place. `guard_dim` leading
/// components are subject to the blow-up guard.
template <class Rhs>
void integrate(Rhs&& rhs, std::vector<double>& y, double t0, double t1, const IntegratorConfig& cfg,
               std::size_t guard_dim) {
  cfg.validate();
  if (t1 <= t0) return;
  const std::size_t n = y.size();
  auto call = [&](double t, const std::vector<double>& in, std::vector<double>& out) {
    rhs(t, std::span<const double>(in), std::span<double>(out));
  };

  if (cfg.method == IntegratorConfig::Method::RungeKutta4) {
    const long steps = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / cfg.step - 1e-12)));
    if (steps > cfg.max_steps) throw NumericError("step budget exceeded");
    const double h = (t1 - t0) / static_cast<double>(steps);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (long s = 0; s < steps; ++s) {
      const double t = t0 + h * static_cast<double>(s);
      call(t, y, k1);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
      call(t + 0.5 * h, tmp, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
      call(t + 0.5 * h, tmp, k3);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
      call(t + h, tmp, k4);
      for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      check_state(y, guard_dim, cfg, t + h);
    }
    return;
  }

  // Dormand-Prince 5(4), FSAL.
  constexpr double a21 = 1.0 / 5.0;
  constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                   a54 = -212.0 / 729.0;
  constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                   a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
  constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                   b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
  constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                   e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
  constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;

  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);
  auto scale = [&](double a, double b) {
    return cfg.atol + cfg.rtol * std::max(std::abs(a), std::abs(b));
  };

  double t = t0;
  call(t, y, k1);

  double h = cfg.step > 0.0 && cfg.step < (t1 - t0) ? cfg.step : 0.0;
  if (h <= 0.0) {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = scale(y[i], y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / double(n));
    d1 = std::sqrt(d1 / double(n));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t1 - t0);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h0 * k1[i];
    call(t + h0, tmp, k2);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = scale(y[i], y[i]);
      d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / double(n)) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min(100.0 * h0, h1);
  }

  long steps = 0;
  while (t < t1) {
    if (++steps > cfg.max_steps)
      throw NumericError("step budget exceeded at t=" + std::to_string(t) +
                         " (blow-up or tolerance too tight)");
    bool last = false;
    if (t + h >= t1 || t + 1.0001 * h >= t1) {
      h = t1 - t;
      last = true;
    }
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    call(t + c2 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    call(t + c3 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    call(t + c4 * h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    call(t + c5 * h, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    call(t + h, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    call(t + h, ynew, k7);

    double err = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double ei =
          h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double r = ei / scale(y[i], ynew[i]);
      err += r * r;
      if (!std::isfinite(ynew[i])) finite = false;
    }
    err = std::sqrt(err / double(n));
    if (!finite || !std::isfinite(err)) {
      h *= 0.1;
      if (h < 1e-14 * std::max(1.0, std::abs(t)))
        throw NumericError("non-finite state at t=" + std::to_string(t) + " (blow-up)");
      continue;
    }
    if (err <= 1.0) {
      t = last ? t1 : t + h;
      y.swap(ynew);
      k1.swap(k7);
      check_state(y, guard_dim, cfg, t);
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= fac;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h < 1e-15 * std::max(1.0, std::abs(t)))
        throw NumericError("step size underflow at t=" + std::to_string(t));
    }
  }
}

}  // namespace jumpflow::detail
