#pragma once

// Initial patches: disk, ellipse, square, and disjoint unions of disks, as
// signed-distance level sets on a grid.

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "cagg/grid.hpp"
#include "cagg/levelset.hpp"

namespace cagg {

struct Disk {
  Point c{0.0, 0.0};
  double r = 1.0;
};
struct Ellipse {
  Point c{0.0, 0.0};
  double a = 1.0;  // semi-axis along x
  double b = 1.0;  // semi-axis along y
};
struct Square {
  Point c{0.0, 0.0};
  double s = 1.0;  // side length
};
struct TwoDisks {
  Disk first;
  Disk second;
};

using Shape = std::variant<Disk, Ellipse, Square, TwoDisks>;

inline double signed_distance(const Disk& d, double x, double y) { return std::hypot(x - d.c[0], y - d.c[1]) - d.r; }

inline double signed_distance(const Square& q, double x, double y) {
  const double dx = std::fabs(x - q.c[0]) - 0.5 * q.s;
  const double dy = std::fabs(y - q.c[1]) - 0.5 * q.s;
  const double outside = std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
  return outside + std::min(std::max(dx, dy), 0.0);
}

inline double signed_distance(const TwoDisks& t, double x, double y) {
  return std::min(signed_distance(t.first, x, y), signed_distance(t.second, x, y));
}

/// Implicit function with the right zero set; not a distance (reinitialised by `make_level_set`).
inline double signed_distance(const Ellipse& e, double x, double y) {
  const double u = (x - e.c[0]) / e.a, v = (y - e.c[1]) / e.b;
  return (std::hypot(u, v) - 1.0) * std::min(e.a, e.b);
}

inline double shape_area(const Shape& s) {
  struct V {
    double operator()(const Disk& d) const { return std::numbers::pi * d.r * d.r; }
    double operator()(const Ellipse& e) const { return std::numbers::pi * e.a * e.b; }
    double operator()(const Square& q) const { return q.s * q.s; }
    double operator()(const TwoDisks& t) const { return (*this)(t.first) + (*this)(t.second); }
  };
  return std::visit(V{}, s);
}

inline LevelSet make_level_set(const GridSpec& grid, const Shape& shape) {
  LevelSet ls = LevelSet::sample(grid, [&](double x, double y) {
    return std::visit([&](const auto& s) { return signed_distance(s, x, y); }, shape);
  });
  if (std::holds_alternative<Ellipse>(shape)) reinitialize(ls);
  return ls;
}

inline PatchMask make_mask(const GridSpec& grid, const Shape& shape) { return patch_mask(make_level_set(grid, shape)); }

/// Ellipse with the given aspect ratio a/b and area.
inline Ellipse ellipse_with_area(double aspect, double area, Point c = {0.0, 0.0}) {
  const double b = std::sqrt(area / (std::numbers::pi * aspect));
  return Ellipse{c, aspect * b, b};
}

}  // namespace cagg
