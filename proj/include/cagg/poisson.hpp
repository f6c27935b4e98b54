#pragma once

// -Laplace(p) = rhs in {phi < 0}, p = 0 on the zero level set, solved with the
// symmetric cut-cell (ghost fluid) discretisation and Jacobi-preconditioned CG.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cagg/error.hpp"
#include "cagg/grid.hpp"
#include "cagg/levelset.hpp"

namespace cagg {

struct PressureSolve {
  ScalarField p;
  double residual = 0.0;  // max |(-Laplace p - rhs)| over unknown cells
  int iterations = 0;
};

struct PoissonOptions {
  double rhs = 1.0;
  double tolerance = 1e-10;  // on the max-norm residual
  int max_iterations = 20000;
  /// Interface distances below theta_min * h are clamped.
  double theta_min = 1e-2;
};

namespace detail {

/// Fraction of the way from cell value a (inside) to neighbour value b (outside) at which phi vanishes.
inline double crossing_fraction(double a, double b, double theta_min) {
  const double theta = a / (a - b);
  return std::clamp(theta, theta_min, 1.0);
}

}  // namespace detail

inline PressureSolve solve_pressure(const LevelSet& ls, const PoissonOptions& opt = {},
                                    const ScalarField* warm_start = nullptr) {
  const auto& g = ls.grid;
  const std::size_t n = g.size();
  const double h2 = g.cell_area();

  std::vector<double> diag(n, 0.0);
  std::vector<std::uint8_t> unknown(n, 0);
  std::size_t count = 0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t id = g.index(i, j);
      const double v = ls.phi[id];
      if (!(v < 0.0)) continue;
      if (i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1)
        throw solver_error("solve_pressure: patch touches the box edge");
      unknown[id] = 1;
      ++count;
      double d = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double w = ls(i + detail::kDi[k], j + detail::kDj[k]);
        d += w < 0.0 ? 1.0 : 1.0 / detail::crossing_fraction(v, w, opt.theta_min);
      }
      diag[id] = d;
    }

  PressureSolve out{ScalarField(g), 0.0, 0};
  if (count == 0) return out;

  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (int j = 1; j + 1 < g.ny; ++j)
      for (int i = 1; i + 1 < g.nx; ++i) {
        const std::size_t id = g.index(i, j);
        if (!unknown[id]) continue;
        double s = diag[id] * x[id];
        for (int k = 0; k < 4; ++k) {
          const std::size_t nb = g.index(i + detail::kDi[k], j + detail::kDj[k]);
          if (unknown[nb]) s -= x[nb];
        }
        y[id] = s;
      }
  };

  std::vector<double> x(n, 0.0), r(n, 0.0), z(n, 0.0), p(n, 0.0), q(n, 0.0);
  if (warm_start != nullptr && warm_start->grid() == g)
    for (std::size_t id = 0; id < n; ++id) x[id] = unknown[id] ? std::max((*warm_start)[id], 0.0) : 0.0;

  const double b = opt.rhs * h2;
  apply(x, q);
  double rz = 0.0;
  auto residual_max = [&]() {
    double m = 0.0;
    for (std::size_t id = 0; id < n; ++id)
      if (unknown[id]) m = std::max(m, std::fabs(r[id]));
    return m / h2;
  };
  for (std::size_t id = 0; id < n; ++id) {
    if (!unknown[id]) continue;
    r[id] = b - q[id];
    z[id] = r[id] / diag[id];
    p[id] = z[id];
    rz += r[id] * z[id];
  }
  double res = residual_max();
  int it = 0;
  while (res > opt.tolerance && it < opt.max_iterations) {
    apply(p, q);
    double pq = 0.0;
    for (std::size_t id = 0; id < n; ++id)
      if (unknown[id]) pq += p[id] * q[id];
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    double rz_new = 0.0;
    for (std::size_t id = 0; id < n; ++id) {
      if (!unknown[id]) continue;
      x[id] += alpha * p[id];
      r[id] -= alpha * q[id];
      z[id] = r[id] / diag[id];
      rz_new += r[id] * z[id];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t id = 0; id < n; ++id)
      if (unknown[id]) p[id] = z[id] + beta * p[id];
    ++it;
    if (it % 10 == 0) res = residual_max();
  }
  // true residual
  apply(x, q);
  for (std::size_t id = 0; id < n; ++id)
    if (unknown[id]) r[id] = b - q[id];
  res = residual_max();
  if (!(res <= std::max(opt.tolerance * 10.0, 1e-8)))
    throw solver_error("solve_pressure: CG did not converge (residual " + std::to_string(res) + ")", res);

  for (std::size_t id = 0; id < n; ++id) out.p[id] = unknown[id] ? x[id] : 0.0;
  out.residual = res;
  out.iterations = it;
  return out;
}

/// Pressure with linear ghost extrapolation into the first ring of outside
/// cells, so that {q > k} and {q > 0} have a resolved boundary.
inline ScalarField pressure_with_ghosts(const LevelSet& ls, const ScalarField& p, double theta_min = 1e-2) {
  const auto& g = ls.grid;
  ScalarField q = p;
  for (int j = 1; j + 1 < g.ny; ++j)
    for (int i = 1; i + 1 < g.nx; ++i) {
      const double v = ls(i, j);
      if (v < 0.0) continue;
      double s = 0.0;
      int c = 0;
      for (int k = 0; k < 4; ++k) {
        const int a = i + detail::kDi[k], b = j + detail::kDj[k];
        const double w = ls(a, b);
        if (!(w < 0.0)) continue;
        // line through (0, p_in) and (theta h, 0), evaluated at h
        const double theta = detail::crossing_fraction(w, v, theta_min);
        s += -p(a, b) * (1.0 - theta) / theta;
        ++c;
      }
      if (c > 0) q(i, j) = s / c;
    }
  return q;
}

/// Derivative of the pressure along one axis at an inside cell, second order,
/// using p = 0 at interface crossings of outside neighbours.
inline double pressure_derivative(const LevelSet& ls, const ScalarField& p, int i, int j, bool xdir,
                                  double theta_min = 1e-2) {
  const double h = ls.grid.h;
  const int di = xdir ? 1 : 0, dj = xdir ? 0 : 1;
  const double v = ls(i, j);
  auto side = [&](int s, double& pos, double& val) {
    const int a = i + s * di, b = j + s * dj;
    const double w = ls(a, b);
    if (w < 0.0) {
      pos = s * h;
      val = p(a, b);
    } else {
      pos = s * h * detail::crossing_fraction(v, w, theta_min);
      val = 0.0;
    }
  };
  double x0, f0, x2, f2;
  side(-1, x0, f0);
  side(+1, x2, f2);
  const double x1 = 0.0, f1 = p(i, j);
  return f0 * (x1 - x2) / ((x0 - x1) * (x0 - x2)) + f1 * (2 * x1 - x0 - x2) / ((x1 - x0) * (x1 - x2)) +
         f2 * (x1 - x0) / ((x2 - x0) * (x2 - x1));
}

}  // namespace cagg
