#pragma once

// Geometry and energy diagnostics of patches: Fraenkel asymmetry, the Talenti
// functional F and distribution function g(k) of the pressure, isoperimetric
// deficit, energy gap to the equal-area disk, and decay-rate fits.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cagg/calibration.hpp"
#include "cagg/error.hpp"
#include "cagg/grid.hpp"
#include "cagg/levelset.hpp"
#include "cagg/newtonian.hpp"
#include "cagg/poisson.hpp"

namespace cagg {

struct ShapeReport {
  double area = 0.0;
  double perimeter = 0.0;
  double asymmetry = 0.0;
  double f_value = 0.0;
  Point best_disk_center{0.0, 0.0};
  double m2 = 0.0;
  double energy_gap = 0.0;
};

namespace detail {

/// |E delta B(c, r)| where E has per-cell fractions `frac` and total area `area_e`.
inline double disk_symmetric_difference(const PatchMask& e, double area_e, Point c, double r) {
  const auto& g = e.grid;
  const double h = g.h;
  const int i0 = std::max(0, static_cast<int>(std::floor((c[0] - r - g.ox) / h)) - 1);
  const int i1 = std::min(g.nx - 1, static_cast<int>(std::ceil((c[0] + r - g.ox) / h)) + 1);
  const int j0 = std::max(0, static_cast<int>(std::floor((c[1] - r - g.oy) / h)) - 1);
  const int j1 = std::min(g.ny - 1, static_cast<int>(std::ceil((c[1] + r - g.oy) / h)) + 1);
  double inside_box_e = 0.0, diff = 0.0, disk = 0.0;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      const double dx = g.x(i) - c[0], dy = g.y(j) - c[1];
      const double rr = std::hypot(dx, dy);
      const double d = rr - r;
      double fb;
      if (d <= -h) fb = 1.0;
      else if (d >= h) fb = 0.0;
      else if (rr < 1e-14) fb = 1.0;
      else fb = halfplane_fraction(d, dx / rr, dy / rr, h);
      const double fe = e.fraction[g.index(i, j)];
      inside_box_e += fe;
      diff += std::fabs(fe - fb);
      disk += fb;
    }
  // disk mass cut off by the box edge counts as outside E
  const double cut = std::max(std::numbers::pi * r * r / g.cell_area() - disk, 0.0);
  return (diff + cut) * g.cell_area() + (area_e - inside_box_e * g.cell_area());
}

}  // namespace detail

struct AsymmetryResult {
  double asymmetry = 0.0;
  Point center{0.0, 0.0};
};

/// A(E) = min over x0 of |E delta B(x0, r)| / |E|, r = sqrt(|E| / pi). Lies in [0, 2);
/// values above 1 occur for long thin sets.
inline AsymmetryResult fraenkel_asymmetry(const PatchMask& e) {
  const double a = e.area();
  if (!(a > 0.0)) throw domain_error("fraenkel_asymmetry: empty mask");
  const auto& g = e.grid;
  const double r = std::sqrt(a / std::numbers::pi);
  auto cost = [&](Point c) { return detail::disk_symmetric_difference(e, a, c, r); };

  // coarse scan over the bounding box of E, then descent from the better of scan and centroid
  int i0 = g.nx, i1 = -1, j0 = g.ny, j1 = -1;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (e.fraction[g.index(i, j)] > 0.0) {
        i0 = std::min(i0, i), i1 = std::max(i1, i), j0 = std::min(j0, j), j1 = std::max(j1, j);
      }
  Point best = center_of_mass(e.density());
  double best_cost = cost(best);
  const double step = std::max(r / 4.0, g.h);
  for (double y = g.y(j0); y <= g.y(j1) + 1e-12; y += step)
    for (double x = g.x(i0); x <= g.x(i1) + 1e-12; x += step) {
      const double c = cost({x, y});
      if (c < best_cost) best_cost = c, best = {x, y};
    }
  for (double s : {4.0 * g.h, g.h, g.h / 4.0}) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int k = 0; k < 4; ++k) {
        const Point p{best[0] + detail::kDi[k] * s, best[1] + detail::kDj[k] * s};
        const double c = cost(p);
        if (c < best_cost - 1e-15) {
          best_cost = c, best = p;
          improved = true;
        }
      }
    }
  }
  return {std::clamp(best_cost / a, 0.0, 2.0), best};
}

// ---------------------------------------------------------------------------

struct TalentiProfile {
  std::vector<double> k;      // levels in [0, max p)
  std::vector<double> g;      // |{p > k}|
  std::vector<double> slope;  // centred difference of g over +-window levels, NaN near the ends
  double p_max = 0.0;
  double area = 0.0;
  /// Largest slope over levels in [0.1, 0.9] * p_max.
  double max_bulk_slope = -std::numeric_limits<double>::infinity();
};

inline TalentiProfile talenti_profile(const LevelSet& ls, const ScalarField& p, int levels = 200, int window = 5,
                                      double theta_min = 1e-2) {
  if (levels < 2 * window + 3) throw domain_error("talenti_profile: too few levels");
  const auto q = pressure_with_ghosts(ls, p, theta_min);
  TalentiProfile out;
  out.p_max = p.max();
  out.area = area(ls);
  if (!(out.p_max > 0.0)) throw domain_error("talenti_profile: pressure vanishes");
  LevelSet level{ls.grid, std::vector<double>(ls.grid.size())};
  for (int n = 0; n < levels; ++n) {
    const double k = out.p_max * n / levels;
    if (n == 0) {
      out.k.push_back(0.0);
      out.g.push_back(out.area);
      continue;
    }
    for (std::size_t id = 0; id < level.phi.size(); ++id) level.phi[id] = k - q[id];
    out.k.push_back(k);
    out.g.push_back(area(level));
  }
  out.slope.assign(levels, std::numeric_limits<double>::quiet_NaN());
  for (int n = window; n + window < levels; ++n) {
    out.slope[n] = (out.g[n + window] - out.g[n - window]) / (out.k[n + window] - out.k[n - window]);
    if (out.k[n] >= 0.1 * out.p_max && out.k[n] <= 0.9 * out.p_max)
      out.max_bulk_slope = std::max(out.max_bulk_slope, out.slope[n]);
  }
  return out;
}

inline TalentiProfile talenti_profile(const PatchMask& mask, const PoissonOptions& opt = {}) {
  if (mask.empty()) throw domain_error("talenti_profile: empty mask");
  const auto ls = level_set_from_mask(mask);
  return talenti_profile(ls, solve_pressure(ls, opt).p, 200, 5, opt.theta_min);
}

/// F = -|Omega|^2 / (2 pi) + 4 int p.
inline double f_functional(double area, const ScalarField& p) {
  return -area * area / (2.0 * std::numbers::pi) + 4.0 * mass(p);
}

inline double f_functional(const PatchMask& mask, const PoissonOptions& opt = {}) {
  if (mask.empty()) throw domain_error("f_functional: empty mask");
  const auto ls = level_set_from_mask(mask);
  return f_functional(mask.area(), solve_pressure(ls, opt).p);
}

// ---------------------------------------------------------------------------

struct IsoperimetricReport {
  double perimeter = 0.0;
  double area = 0.0;
  double ratio = 0.0;      // P / (2 sqrt(pi |E|))
  double asymmetry = 0.0;
  double implied_c = std::numeric_limits<double>::quiet_NaN();  // (ratio - 1) / A^2, NaN if A = 0
  bool ok = true;          // implied_c > 0 whenever A > 0.05
};

inline IsoperimetricReport quantitative_isoperimetric_check(const PatchMask& mask) {
  if (mask.empty()) throw domain_error("quantitative_isoperimetric_check: empty mask");
  IsoperimetricReport r;
  r.perimeter = perimeter(level_set_from_mask(mask));
  r.area = mask.area();
  r.ratio = r.perimeter / (2.0 * std::sqrt(std::numbers::pi * r.area));
  r.asymmetry = fraenkel_asymmetry(mask).asymmetry;
  if (r.asymmetry > 0.0) r.implied_c = (r.ratio - 1.0) / (r.asymmetry * r.asymmetry);
  r.ok = !(r.asymmetry > 0.05) || r.implied_c > 0.0;
  return r;
}

// ---------------------------------------------------------------------------

struct EnergyGapReport {
  double gap = 0.0;        // E(chi_Omega) - E(chi_B), B the equal-area disk
  double bound = 0.0;      // 40 |Omega| (1 + |Omega| + M2) sqrt(A)
  double asymmetry = 0.0;
  double m2 = 0.0;
};

/// The disk energy is the closed form at the radius of the discrete area; the
/// energy is invariant under translation so the disk's centre does not enter.
inline EnergyGapReport energy_gap(const PatchMask& mask, std::optional<double> asymmetry = std::nullopt) {
  if (mask.empty()) throw domain_error("energy_gap: empty mask");
  const auto rho = mask.density();
  const double a = mask.area();
  EnergyGapReport r;
  r.gap = interaction_energy(rho) - disk_interaction_energy(std::sqrt(a / std::numbers::pi));
  r.m2 = second_moment(rho);
  r.asymmetry = asymmetry ? *asymmetry : fraenkel_asymmetry(mask).asymmetry;
  r.bound = 40.0 * a * (1.0 + a + r.m2) * std::sqrt(r.asymmetry);
  return r;
}

inline ShapeReport shape_report(const LevelSet& ls, const ScalarField& p) {
  const auto mask = patch_mask(ls);
  ShapeReport r;
  r.area = mask.area();
  r.perimeter = perimeter(ls);
  const auto asym = fraenkel_asymmetry(mask);
  r.asymmetry = asym.asymmetry;
  r.best_disk_center = asym.center;
  r.f_value = f_functional(r.area, p);
  r.m2 = second_moment(mask.density());
  r.energy_gap = energy_gap(mask, r.asymmetry).gap;
  return r;
}

inline ShapeReport shape_report(const PatchMask& mask, const PoissonOptions& opt = {}) {
  const auto ls = level_set_from_mask(mask);
  return shape_report(ls, solve_pressure(ls, opt).p);
}

// ---------------------------------------------------------------------------

/// C1 = C2 |Omega0|^(2/3) (1 + |Omega0| + M2)^(7/6).
inline double rate_constant(double area0, double m2_0, double c2 = calibration::kC2) {
  return c2 * std::pow(area0, 2.0 / 3.0) * std::pow(1.0 + area0 + m2_0, 7.0 / 6.0);
}

/// C(Omega0) = (M2 / (c0 |Omega0|^2))^(1/3).
inline double excursion_constant(double area0, double m2_0, double c0 = calibration::kC0) {
  return std::cbrt(m2_0 / (c0 * area0 * area0));
}

struct RateFit {
  double exponent = 0.0;  // slope of log gap against log t on the tail
  double constant = 0.0;  // exp(intercept)
  double max_ratio = 0.0; // max gap(t) / t^(-1/6) over the tail
  int points = 0;
};

/// Least-squares fit of log(value) against log(t) for t >= t_tail. The series
/// must have >= 20 points with positive t and value, spanning >= 1.5 decades in t.
inline RateFit rate_fit(const std::vector<std::pair<double, double>>& series, double t_tail) {
  std::vector<std::pair<double, double>> pos;
  for (auto [t, v] : series)
    if (t > 0.0 && v > 0.0) pos.emplace_back(t, v);
  if (pos.size() < 20) throw domain_error("rate_fit: fewer than 20 positive points");
  const auto [lo, hi] = std::minmax_element(pos.begin(), pos.end());
  if (std::log10(hi->first / lo->first) < 1.5) throw domain_error("rate_fit: series spans fewer than 1.5 decades");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  RateFit out;
  for (auto [t, v] : pos) {
    if (t < t_tail) continue;
    const double x = std::log(t), y = std::log(v);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++out.points;
    out.max_ratio = std::max(out.max_ratio, v / std::pow(t, -1.0 / 6.0));
  }
  if (out.points < 3) throw domain_error("rate_fit: fewer than 3 points in the tail");
  const double n = out.points;
  const double den = n * sxx - sx * sx;
  if (!(den > 0.0)) throw domain_error("rate_fit: degenerate tail");
  out.exponent = (n * sxy - sx * sy) / den;
  out.constant = std::exp((sy - out.exponent * sx) / n);
  return out;
}

}  // namespace cagg
