#pragma once

// Uniform 2-D cell-centred grids, scalar fields on them, patch masks, and the
// measure-level diagnostics (mass, moments, centre of mass, L^p distances).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cagg/error.hpp"

namespace cagg {

using Point = std::array<double, 2>;

struct GridSpec {
  int nx = 0;
  int ny = 0;
  double h = 0.0;
  /// Coordinates of the centre of cell (0, 0).
  double ox = 0.0;
  double oy = 0.0;

  static constexpr std::int64_t kMaxCells = std::int64_t{1} << 26;

  /// Square box [lo, hi]^2 tiled by cells of size h; cell centres sit at lo + (i + 1/2) h.
  static GridSpec box(double lo, double hi, double h) {
    const int n = static_cast<int>(std::lround((hi - lo) / h));
    GridSpec g{n, n, h, lo + 0.5 * h, lo + 0.5 * h};
    g.validate();
    return g;
  }

  void validate() const {
    if (nx <= 0 || ny <= 0) throw domain_error("GridSpec: nx and ny must be positive");
    if (!(h > 0.0) || !std::isfinite(h)) throw domain_error("GridSpec: h must be positive");
    if (std::int64_t{nx} * ny > kMaxCells) throw domain_error("GridSpec: more than 2^26 cells");
    if (!std::isfinite(ox) || !std::isfinite(oy)) throw domain_error("GridSpec: non-finite origin");
  }

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
  }
  double x(int i) const { return ox + i * h; }
  double y(int j) const { return oy + j * h; }
  Point center(int i, int j) const { return {x(i), y(j)}; }
  double cell_area() const { return h * h; }

  double xmin() const { return ox - 0.5 * h; }
  double xmax() const { return ox + (nx - 0.5) * h; }
  double ymin() const { return oy - 0.5 * h; }
  double ymax() const { return oy + (ny - 0.5) * h; }
  double box_area() const { return (xmax() - xmin()) * (ymax() - ymin()); }

  bool operator==(const GridSpec&) const = default;
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw grid_mismatch(std::string(what) + ": fields live on different grids");
}

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& grid, double value = 0.0)
      : grid_(grid), values_(grid.size(), value) {
    grid_.validate();
  }
  ScalarField(const GridSpec& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != grid_.size()) throw grid_mismatch("ScalarField: value count does not match grid");
  }

  /// Samples f at cell centres.
  static ScalarField sample(const GridSpec& grid, const std::function<double(double, double)>& f) {
    ScalarField out(grid);
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) out(i, j) = f(grid.x(i), grid.y(j));
    return out;
  }

  const GridSpec& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }
  bool nonnegative() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v >= 0.0; });
  }
  double max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }
  double min() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::fabs(v));
    return m;
  }

  ScalarField& operator+=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "operator+=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "operator-=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(ScalarField a, double s) { return a *= s; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }

 private:
  GridSpec grid_{};
  std::vector<double> values_;
};

/// Characteristic function of a patch. `fraction` holds the sub-cell volume
/// fraction in [0, 1]; `inside` is the cell-centre indicator. Masks built from a
/// level set keep the level set so cut-cell solvers can recover the interface.
struct PatchMask {
  GridSpec grid;
  std::vector<std::uint8_t> inside;
  std::vector<double> fraction;
  std::vector<double> phi;  // optional signed distance, empty if unknown

  static PatchMask from_indicator(const GridSpec& grid, std::vector<std::uint8_t> inside) {
    if (inside.size() != grid.size()) throw grid_mismatch("PatchMask: indicator size does not match grid");
    PatchMask m{grid, std::move(inside), {}, {}};
    m.fraction.resize(m.inside.size());
    for (std::size_t k = 0; k < m.inside.size(); ++k) m.fraction[k] = m.inside[k] ? 1.0 : 0.0;
    return m;
  }

  std::size_t count() const { return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), 1)); }
  bool empty() const { return count() == 0 && area() == 0.0; }
  /// Cut-cell area, sum of fractions times h^2.
  double area() const {
    double s = 0.0;
    for (double f : fraction) s += f;
    return s * grid.cell_area();
  }
  /// Area by cell counting, count * h^2.
  double cell_count_area() const { return static_cast<double>(count()) * grid.cell_area(); }

  /// Density chi_Omega using sub-cell fractions.
  ScalarField density() const { return ScalarField(grid, fraction); }
  /// Complement within the box.
  PatchMask complement() const {
    PatchMask c = *this;
    for (auto& v : c.inside) v = v ? 0 : 1;
    for (auto& f : c.fraction) f = 1.0 - f;
    for (auto& p : c.phi) p = -p;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Diagnostics. All sums run in fixed row-major order.

inline double mass(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s * f.grid().cell_area();
}

inline double second_moment(const ScalarField& f, Point about = {0.0, 0.0}) {
  const auto& g = f.grid();
  double s = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const double dy = g.y(j) - about[1];
    for (int i = 0; i < g.nx; ++i) {
      const double dx = g.x(i) - about[0];
      s += f(i, j) * (dx * dx + dy * dy);
    }
  }
  return s * g.cell_area();
}

inline Point center_of_mass(const ScalarField& f) {
  const auto& g = f.grid();
  double s = 0.0, sx = 0.0, sy = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double v = f(i, j);
      s += v;
      sx += v * g.x(i);
      sy += v * g.y(j);
    }
  if (!(s > 0.0)) throw domain_error("center_of_mass: field has zero mass");
  return {sx / s, sy / s};
}

inline double lp_distance(const ScalarField& f, const ScalarField& g, double p) {
  require_same_grid(f.grid(), g.grid(), "lp_distance");
  if (!(p >= 1.0)) throw domain_error("lp_distance: p must be >= 1");
  double s = 0.0;
  if (std::isinf(p)) {
    for (std::size_t k = 0; k < f.grid().size(); ++k) s = std::max(s, std::fabs(f[k] - g[k]));
    return s;
  }
  for (std::size_t k = 0; k < f.grid().size(); ++k) s += std::pow(std::fabs(f[k] - g[k]), p);
  return std::pow(s * f.grid().cell_area(), 1.0 / p);
}

inline double lp_norm(const ScalarField& f, double p) { return lp_distance(f, ScalarField(f.grid()), p); }

/// h^2 sum (f - 1)_+.
inline double excess_mass(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += std::max(v - 1.0, 0.0);
  return s * f.grid().cell_area();
}

/// Largest |x - about| over cells whose value exceeds `threshold`, measured to the far cell corner.
inline double support_radius(const ScalarField& f, Point about = {0.0, 0.0}, double threshold = 0.0) {
  const auto& g = f.grid();
  double r = 0.0;
  const double half_diag = g.h * std::numbers::sqrt2 * 0.5;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (f(i, j) > threshold) r = std::max(r, std::hypot(g.x(i) - about[0], g.y(j) - about[1]) + half_diag);
  return r;
}

/// Distance (in cells) from the support of f to the nearest box edge; large when f == 0.
inline int support_margin_cells(const ScalarField& f, double threshold = 0.0) {
  const auto& g = f.grid();
  int margin = std::numeric_limits<int>::max();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (f(i, j) > threshold) margin = std::min({margin, i, j, g.nx - 1 - i, g.ny - 1 - j});
  return margin;
}

inline void require_margin(const ScalarField& f, int cells, const char* what, double threshold = 0.0) {
  const int m = support_margin_cells(f, threshold);
  if (m < cells)
    throw solver_error(std::string(what) + ": support within " + std::to_string(m) + " cells of the box edge (need " +
                       std::to_string(cells) + ")");
}

}  // namespace cagg
