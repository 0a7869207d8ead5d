#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "ayrl/errors.hpp"

namespace ayrl {

/// Classical fourth-order Runge-Kutta step for an autonomous system.
/// Deriv: void(const std::array<double, N>& y, std::array<double, N>& dydt).
template <std::size_t N, typename Deriv>
std::array<double, N> rk4_step(const Deriv& deriv, const std::array<double, N>& y, double dt) {
  std::array<double, N> k1, k2, k3, k4, tmp;

  deriv(y, k1);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
  deriv(tmp, k2);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
  deriv(tmp, k3);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + dt * k3[i];
  deriv(tmp, k4);

  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

/// Integrates over [0, t_total] in `substeps` equal RK4 steps. Throws
/// NumericError if the state leaves the finite range.
template <std::size_t N, typename Deriv>
std::array<double, N> rk4_integrate(const Deriv& deriv, std::array<double, N> y, double t_total,
                                    int substeps) {
  if (substeps <= 0) throw UsageError("rk4_integrate: substeps must be positive");
  const double dt = t_total / substeps;
  for (int s = 0; s < substeps; ++s) {
    y = rk4_step<N>(deriv, y, dt);
    for (std::size_t i = 0; i < N; ++i) {
      if (!std::isfinite(y[i])) {
        throw NumericError("rk4_integrate: state became non-finite at substep " +
                           std::to_string(s));
      }
    }
  }
  return y;
}

}  // namespace ayrl
