#pragma once

// Signed-distance level sets on the cell-centred grid (negative inside):
// fast-marching reinitialisation, normal velocity extension, first-order
// Godunov advection, cut-cell volume fractions, area-preserving shifts, and
// marching-squares perimeter.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "cagg/error.hpp"
#include "cagg/grid.hpp"

namespace cagg {

struct LevelSet {
  GridSpec grid;
  std::vector<double> phi;

  static LevelSet sample(const GridSpec& grid, const std::function<double(double, double)>& f) {
    LevelSet ls{grid, std::vector<double>(grid.size())};
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) ls.phi[grid.index(i, j)] = f(grid.x(i), grid.y(j));
    return ls;
  }

  double operator()(int i, int j) const { return phi[grid.index(i, j)]; }
  double& operator()(int i, int j) { return phi[grid.index(i, j)]; }
  bool inside(int i, int j) const { return (*this)(i, j) < 0.0; }
  ScalarField as_field() const { return ScalarField(grid, phi); }
};

namespace detail {

inline constexpr int kDi[4] = {1, -1, 0, 0};
inline constexpr int kDj[4] = {0, 0, 1, -1};

inline bool in_box(const GridSpec& g, int i, int j) { return i >= 0 && j >= 0 && i < g.nx && j < g.ny; }

/// Gradient of phi at a cell by central differences (one-sided at the box edge).
inline std::pair<double, double> phi_gradient(const LevelSet& ls, int i, int j) {
  const auto& g = ls.grid;
  auto d = [&](int a, int b, bool xdir) {
    const int n = xdir ? g.nx : g.ny;
    const int c = xdir ? a : b;
    if (n == 1) return 0.0;
    if (c == 0) return xdir ? (ls(a + 1, b) - ls(a, b)) / g.h : (ls(a, b + 1) - ls(a, b)) / g.h;
    if (c == n - 1) return xdir ? (ls(a, b) - ls(a - 1, b)) / g.h : (ls(a, b) - ls(a, b - 1)) / g.h;
    return xdir ? (ls(a + 1, b) - ls(a - 1, b)) / (2 * g.h) : (ls(a, b + 1) - ls(a, b - 1)) / (2 * g.h);
  };
  return {d(i, j, true), d(i, j, false)};
}

/// Fraction of the unit-normalised square cell lying in {n . s + d < 0}, where
/// d is the signed distance of the cell centre and (nx, ny) the unit normal, h the cell size.
inline double halfplane_fraction(double d, double nx, double ny, double h) {
  double a = std::fabs(nx) * h;
  double b = std::fabs(ny) * h;
  if (a > b) std::swap(a, b);
  // t: distance from the deepest corner to the line, along the normal
  const double t = -d + 0.5 * (a + b);
  if (t <= 0.0) return 0.0;
  if (t >= a + b) return 1.0;
  if (a < 1e-12 * h) return std::clamp(t / b, 0.0, 1.0);
  double area;
  if (t <= a) area = t * t / (2.0 * a * b);
  else if (t <= b) area = (2.0 * t - a) / (2.0 * b);
  else area = 1.0 - (a + b - t) * (a + b - t) / (2.0 * a * b);
  return std::clamp(area, 0.0, 1.0);
}

}  // namespace detail

/// Volume fraction of {phi < 0} in every cell from the local linearisation of phi.
inline std::vector<double> volume_fractions(const LevelSet& ls) {
  const auto& g = ls.grid;
  std::vector<double> frac(g.size(), 0.0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double v = ls(i, j);
      // phi need not be a distance here (pressure level sets), so cells are
      // classified by v / |grad phi| rather than by v alone
      if (v <= -4.0 * g.h) { frac[g.index(i, j)] = 1.0; continue; }
      if (v >= 4.0 * g.h) continue;
      auto [gx, gy] = detail::phi_gradient(ls, i, j);
      const double norm = std::hypot(gx, gy);
      if (norm < 1e-12) { frac[g.index(i, j)] = v < 0.0 ? 1.0 : 0.0; continue; }
      frac[g.index(i, j)] = detail::halfplane_fraction(v / norm, gx / norm, gy / norm, g.h);
    }
  return frac;
}

inline double area(const LevelSet& ls) {
  double s = 0.0;
  for (double f : volume_fractions(ls)) s += f;
  return s * ls.grid.cell_area();
}

/// Cells with phi < 0, with cut-cell fractions and a copy of phi.
inline PatchMask patch_mask(const LevelSet& ls) {
  PatchMask m;
  m.grid = ls.grid;
  m.inside.resize(ls.grid.size());
  for (std::size_t k = 0; k < ls.phi.size(); ++k) m.inside[k] = ls.phi[k] < 0.0 ? 1 : 0;
  m.fraction = volume_fractions(ls);
  m.phi = ls.phi;
  return m;
}

/// Cells with a 4-neighbour of opposite sign.
inline std::vector<std::uint8_t> interface_cells(const LevelSet& ls) {
  const auto& g = ls.grid;
  std::vector<std::uint8_t> out(g.size(), 0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const bool in = ls(i, j) < 0.0;
      for (int k = 0; k < 4; ++k) {
        const int a = i + detail::kDi[k], b = j + detail::kDj[k];
        if (detail::in_box(g, a, b) && (ls(a, b) < 0.0) != in) {
          out[g.index(i, j)] = 1;
          break;
        }
      }
    }
  return out;
}

/// Rebuilds phi as a signed distance by first-order fast marching, keeping the
/// zero crossings along grid lines fixed. Cells beyond `band` keep +-band.
inline void reinitialize(LevelSet& ls, double band = std::numeric_limits<double>::infinity()) {
  const auto& g = ls.grid;
  const double h = g.h;
  const std::size_t n = g.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> state(n, 0);  // 0 far, 1 trial, 2 accepted
  const auto iface = interface_cells(ls);

  bool any = false;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t id = g.index(i, j);
      if (!iface[id]) continue;
      const double v = ls.phi[id];
      double inv2 = 0.0;
      for (int axis = 0; axis < 2; ++axis) {
        double best = std::numeric_limits<double>::infinity();
        for (int s = 0; s < 2; ++s) {
          const int k = 2 * axis + s;
          const int a = i + detail::kDi[k], b = j + detail::kDj[k];
          if (!detail::in_box(g, a, b)) continue;
          const double w = ls(a, b);
          if ((w < 0.0) == (v < 0.0)) continue;
          const double theta = v / (v - w);
          best = std::min(best, theta * h);
        }
        if (std::isfinite(best)) inv2 += 1.0 / std::max(best * best, 1e-300);
      }
      dist[id] = inv2 > 0.0 ? 1.0 / std::sqrt(inv2) : 0.0;
      state[id] = 2;
      any = true;
    }
  if (!any) {
    // no interface: constant sign everywhere
    for (double& v : ls.phi) v = v < 0.0 ? -band : band;
    if (!std::isfinite(band))
      for (double& v : ls.phi) v = v < 0.0 ? -g.box_area() : g.box_area();
    return;
  }

  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  auto solve = [&](int i, int j) {
    double a = std::numeric_limits<double>::infinity(), b = a;
    if (i > 0 && state[g.index(i - 1, j)] == 2) a = std::min(a, dist[g.index(i - 1, j)]);
    if (i + 1 < g.nx && state[g.index(i + 1, j)] == 2) a = std::min(a, dist[g.index(i + 1, j)]);
    if (j > 0 && state[g.index(i, j - 1)] == 2) b = std::min(b, dist[g.index(i, j - 1)]);
    if (j + 1 < g.ny && state[g.index(i, j + 1)] == 2) b = std::min(b, dist[g.index(i, j + 1)]);
    if (!std::isfinite(a)) return b + h;
    if (!std::isfinite(b)) return a + h;
    if (std::fabs(a - b) >= h) return std::min(a, b) + h;
    return 0.5 * (a + b + std::sqrt(2.0 * h * h - (a - b) * (a - b)));
  };
  auto push_neighbours = [&](int i, int j) {
    for (int k = 0; k < 4; ++k) {
      const int a = i + detail::kDi[k], b = j + detail::kDj[k];
      if (!detail::in_box(g, a, b)) continue;
      const std::size_t id = g.index(a, b);
      if (state[id] == 2) continue;
      const double t = solve(a, b);
      if (t < dist[id]) {
        dist[id] = t;
        state[id] = 1;
        heap.emplace(t, id);
      }
    }
  };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (state[g.index(i, j)] == 2) push_neighbours(i, j);
  while (!heap.empty()) {
    auto [t, id] = heap.top();
    heap.pop();
    if (state[id] == 2 || t > dist[id]) continue;
    state[id] = 2;
    if (t > band) continue;
    const int i = static_cast<int>(id % g.nx), j = static_cast<int>(id / g.nx);
    push_neighbours(i, j);
  }
  for (std::size_t id = 0; id < n; ++id) {
    const double d = std::min(dist[id], band);
    ls.phi[id] = ls.phi[id] < 0.0 ? -d : d;
  }
}

/// Extends `speed` from cells flagged in `known` to every cell with |phi| <= band,
/// constant along the normals: cells are visited in increasing |phi| and take the
/// upwind-weighted average of already assigned neighbours (discrete grad F . grad phi = 0).
/// Assumes phi is (close to) a signed distance.
inline void extend_velocity(const LevelSet& ls, std::vector<double>& speed, std::vector<std::uint8_t> known,
                            double band) {
  const auto& g = ls.grid;
  std::vector<std::size_t> order;
  order.reserve(g.size());
  for (std::size_t id = 0; id < g.size(); ++id)
    if (!known[id] && std::fabs(ls.phi[id]) <= band) order.push_back(id);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = std::fabs(ls.phi[a]), fb = std::fabs(ls.phi[b]);
    return fa < fb || (fa == fb && a < b);
  });
  for (std::size_t id : order) {
    const int i = static_cast<int>(id % g.nx), j = static_cast<int>(id / g.nx);
    const double here = std::fabs(ls.phi[id]);
    double wsum = 0.0, fsum = 0.0, asum = 0.0;
    int acount = 0;
    for (int axis = 0; axis < 2; ++axis) {
      double best_w = 0.0, best_f = 0.0;
      for (int s = 0; s < 2; ++s) {
        const int k = 2 * axis + s;
        const int a = i + detail::kDi[k], b = j + detail::kDj[k];
        if (!detail::in_box(g, a, b)) continue;
        const std::size_t nb = g.index(a, b);
        if (!known[nb]) continue;
        asum += speed[nb];
        ++acount;
        const double w = here - std::fabs(ls.phi[nb]);
        if (w > best_w) {
          best_w = w;
          best_f = speed[nb];
        }
      }
      wsum += best_w;
      fsum += best_w * best_f;
    }
    if (wsum > 0.0) speed[id] = fsum / wsum;
    else if (acount > 0) speed[id] = asum / acount;
    else continue;
    known[id] = 1;
  }
}

/// One forward-Euler Godunov step of phi_t + F |grad phi| = 0 (F = outward normal speed).
inline void advect(LevelSet& ls, const std::vector<double>& speed, double dt) {
  const auto& g = ls.grid;
  const double h = g.h;
  std::vector<double> next(ls.phi);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t id = g.index(i, j);
      const double f = speed[id];
      if (f == 0.0) continue;
      const double c = ls.phi[id];
      const double dxm = i > 0 ? (c - ls(i - 1, j)) / h : 0.0;
      const double dxp = i + 1 < g.nx ? (ls(i + 1, j) - c) / h : 0.0;
      const double dym = j > 0 ? (c - ls(i, j - 1)) / h : 0.0;
      const double dyp = j + 1 < g.ny ? (ls(i, j + 1) - c) / h : 0.0;
      double grad;
      if (f > 0.0) {
        grad = std::sqrt(std::pow(std::max(dxm, 0.0), 2) + std::pow(std::min(dxp, 0.0), 2) +
                         std::pow(std::max(dym, 0.0), 2) + std::pow(std::min(dyp, 0.0), 2));
      } else {
        grad = std::sqrt(std::pow(std::min(dxm, 0.0), 2) + std::pow(std::max(dxp, 0.0), 2) +
                         std::pow(std::min(dym, 0.0), 2) + std::pow(std::max(dyp, 0.0), 2));
      }
      next[id] = c - dt * f * grad;
    }
  ls.phi = std::move(next);
}

/// Shifts phi by a constant so the cut-cell area equals `target`. Returns the shift.
inline double volume_correct(LevelSet& ls, double target, int max_iter = 8) {
  double shift_total = 0.0;
  double a = area(ls);
  for (int it = 0; it < max_iter && std::fabs(a - target) > 1e-13 * std::max(target, 1.0); ++it) {
    // d(area)/d(shift) ~ -perimeter; estimate it by a finite difference
    const double eps = 1e-3 * ls.grid.h;
    LevelSet probe = ls;
    for (double& v : probe.phi) v += eps;
    const double slope = (area(probe) - a) / eps;
    if (!(slope < 0.0)) break;
    const double shift = (target - a) / slope;
    for (double& v : ls.phi) v += shift;
    shift_total += shift;
    a = area(ls);
  }
  return shift_total;
}

/// Length of the zero contour by marching squares over the dual grid of cell centres.
inline double perimeter(const GridSpec& g, const std::vector<double>& phi) {
  double len = 0.0;
  auto val = [&](int i, int j) { return phi[g.index(i, j)]; };
  auto lerp = [](double a, double b) { return a / (a - b); };
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      const double v[4] = {val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)};
      const double px[4] = {0, 1, 1, 0}, py[4] = {0, 0, 1, 1};
      double cx[4], cy[4];
      int nc = 0;
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        if ((v[a] < 0.0) != (v[b] < 0.0)) {
          const double t = lerp(v[a], v[b]);
          cx[nc] = px[a] + t * (px[b] - px[a]);
          cy[nc] = py[a] + t * (py[b] - py[a]);
          ++nc;
        }
      }
      if (nc == 2) {
        len += std::hypot(cx[0] - cx[1], cy[0] - cy[1]);
      } else if (nc == 4) {
        const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        // crossings are on edges 0,1,2,3 in order; pair according to the saddle value
        if ((centre < 0.0) == (v[0] < 0.0)) {
          len += std::hypot(cx[0] - cx[1], cy[0] - cy[1]) + std::hypot(cx[2] - cx[3], cy[2] - cy[3]);
        } else {
          len += std::hypot(cx[3] - cx[0], cy[3] - cy[0]) + std::hypot(cx[1] - cx[2], cy[1] - cy[2]);
        }
      }
    }
  return len * g.h;
}

inline double perimeter(const LevelSet& ls) { return perimeter(ls.grid, ls.phi); }

/// Approximate signed distance from a mask: fractions give a first-order
/// interface position, then fast marching.
inline LevelSet level_set_from_mask(const PatchMask& mask) {
  if (!mask.phi.empty()) return LevelSet{mask.grid, mask.phi};
  LevelSet ls{mask.grid, std::vector<double>(mask.grid.size())};
  for (std::size_t k = 0; k < ls.phi.size(); ++k) ls.phi[k] = (0.5 - mask.fraction[k]) * mask.grid.h;
  reinitialize(ls);
  return ls;
}

}  // namespace cagg
