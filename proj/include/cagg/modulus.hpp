#pragma once

// Log-Lipschitz moduli of convexity and the scalar dynamics they generate:
// omega/sigma, the explicit Euler map f_tau and its iterates, and the exact
// flow F_t of dF/dt = -C_d * omega(F).

#include <cmath>
#include <numbers>
#include <string>

#include "cagg/error.hpp"

namespace cagg {

inline constexpr double kSqrt2 = std::numbers::sqrt2;

struct ModulusParams {
  /// Dimension constant bounding |grad N rho| for unit-mass densities of height <= 1.
  double c_d = 1.0 + 1.0 / (2.0 * std::numbers::pi);

  static double branch_omega() { return std::exp(-1.0 - kSqrt2); }
  static double branch_sigma() { return std::exp((-1.0 - kSqrt2) / 2.0); }

  /// lambda_omega of the omega-convexity inequality.
  double lambda_omega() const { return -c_d; }

  void validate() const {
    if (!(c_d >= 1.0) || !std::isfinite(c_d)) {
      throw domain_error("ModulusParams: c_d must be >= 1, got " + std::to_string(c_d));
    }
  }
};

inline double omega(double x) {
  if (!(x >= 0.0)) throw domain_error("omega: negative argument " + std::to_string(x));
  if (x == 0.0) return 0.0;
  const double b = ModulusParams::branch_omega();
  if (x <= b) return x * std::fabs(std::log(x));
  return std::sqrt(x * x + 2.0 * (1.0 + kSqrt2) * b * x);
}

inline double sigma(double x) {
  if (!(x >= 0.0)) throw domain_error("sigma: negative argument " + std::to_string(x));
  if (x == 0.0) return 0.0;
  if (x <= ModulusParams::branch_sigma()) return 2.0 * x * std::fabs(std::log(x));
  return std::sqrt(x * x + 2.0 * (1.0 + kSqrt2) * ModulusParams::branch_omega());
}

/// One explicit Euler step of dF/dt = -C_d omega(F), clamped to zero for x <= 0.
inline double f_tau(double x, double tau, const ModulusParams& params = {}) {
  if (!(tau > 0.0)) throw domain_error("f_tau: tau must be positive");
  if (x <= 0.0) return 0.0;
  return x - params.c_d * tau * omega(x);
}

/// n-fold composition of f_tau.
inline double f_tau_n(double x, double tau, int n, const ModulusParams& params = {}) {
  if (n < 0) throw domain_error("f_tau_n: negative iteration count");
  for (int k = 0; k < n; ++k) x = f_tau(x, tau, params);
  return x;
}

namespace detail {

inline double omega_rhs(double y, double c_d) { return y > 0.0 ? -c_d * omega(y) : 0.0; }

}  // namespace detail

/// F_t(x). Closed form x^(e^{C_d t}) below the omega branch point; above it RK4
/// with step <= 1e-3 until the trajectory enters the closed-form region.
inline double flow_F(double x, double t, const ModulusParams& params = {}) {
  if (!(x >= 0.0)) throw domain_error("flow_F: negative argument");
  if (!(t >= 0.0)) throw domain_error("flow_F: negative time");
  const double c = params.c_d;
  const double b = ModulusParams::branch_omega();
  if (t == 0.0 || x == 0.0) return x;
  if (x <= b) return std::pow(x, std::exp(c * t));

  const int steps = static_cast<int>(std::ceil(t / 1e-3));
  const double dt = t / steps;
  double y = x;
  double s = 0.0;
  for (int k = 0; k < steps; ++k) {
    if (y <= b) break;
    const double k1 = detail::omega_rhs(y, c);
    const double k2 = detail::omega_rhs(y + 0.5 * dt * k1, c);
    const double k3 = detail::omega_rhs(y + 0.5 * dt * k2, c);
    const double k4 = detail::omega_rhs(y + dt * k3, c);
    y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s += dt;
  }
  if (s < t && y > 0.0 && y <= b) return std::pow(y, std::exp(c * (t - s)));
  return std::max(y, 0.0);
}

}  // namespace cagg
