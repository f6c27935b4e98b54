// Computes the dissipation constant c0 on the calibration shapes and prints
// (or writes) include/cagg/calibration.hpp.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cagg/shape.hpp"
#include "cagg/shapes.hpp"

namespace {

struct Rect {
  double a, b;
};

cagg::LevelSet rectangle(const cagg::GridSpec& g, Rect r) {
  return cagg::LevelSet::sample(g, [&](double x, double y) {
    const double dx = std::fabs(x) - 0.5 * r.a, dy = std::fabs(y) - 0.5 * r.b;
    return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0)) + std::min(std::max(dx, dy), 0.0);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calibrate c0 for the Talenti dissipation bound"};
  double h = 1.0 / 64.0;
  std::string out;
  app.add_option("--spacing", h, "grid spacing");
  app.add_option("--write", out, "write the header to this path");
  CLI11_PARSE(app, argc, argv);

  const auto grid = cagg::GridSpec::box(-3.0, 3.0, h);
  std::vector<std::pair<std::string, cagg::LevelSet>> shapes;
  for (double aspect : {1.5, 2.0, 3.0, 4.0})
    shapes.emplace_back("ellipse " + std::to_string(aspect),
                        cagg::make_level_set(grid, cagg::ellipse_with_area(aspect, std::numbers::pi)));
  for (Rect r : {Rect{1.0, 1.0}, Rect{2.0, 1.0}, Rect{3.0, 1.0}, Rect{4.0, 0.5}})
    shapes.emplace_back("rectangle " + std::to_string(r.a) + "x" + std::to_string(r.b), rectangle(grid, r));
  for (double sep : {0.6, 0.9, 1.2})
    shapes.emplace_back("dumbbell " + std::to_string(sep),
                        cagg::make_level_set(grid, cagg::TwoDisks{{{-sep, 0.0}, 0.7}, {{sep, 0.0}, 0.7}}));

  double ratio_min = std::numeric_limits<double>::infinity();
  std::string arg_min;
  for (const auto& [name, ls] : shapes) {
    const auto mask = cagg::patch_mask(ls);
    const auto p = cagg::solve_pressure(ls);
    const double a = mask.area();
    const double f = cagg::f_functional(a, p.p);
    const double asym = cagg::fraenkel_asymmetry(mask).asymmetry;
    const double ratio = -f / (asym * asym * asym * a * a);
    std::printf("%-24s area %.6f  A %.6f  F %+.6e  -F/(A^3 |E|^2) %.6f\n", name.c_str(), a, asym, f, ratio);
    if (ratio < ratio_min) ratio_min = ratio, arg_min = name;
  }
  const double c0 = 0.5 * ratio_min;
  const double c2 = 40.0 * std::pow(c0, -1.0 / 6.0);
  std::printf("min ratio %.17g (%s)\nc0 = %.17g\nC2 = %.17g\n", ratio_min, arg_min.c_str(), c0, c2);

  if (!out.empty()) {
    std::ofstream os(out);
    os << "#pragma once\n\n"
          "// Frozen constants of the quantitative dissipation bounds, produced by\n"
          "// tools/calibrate (see README). Regenerate with `calibrate --write`.\n\n"
          "namespace cagg::calibration {\n\n"
          "/// c0 in F(Omega) <= -c0 A(Omega)^3 |Omega|^2: half the smallest ratio\n"
          "/// -F / (A^3 |Omega|^2) over the calibration shapes at h = 1/64.\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", c0);
    os << "inline constexpr double kC0 = " << buf << ";\n\n"
       << "/// C2 in C1 = C2 |Omega0|^(2/3) (1 + |Omega0| + M2)^(7/6), from c0.\n";
    std::snprintf(buf, sizeof buf, "%.17g", c2);
    os << "inline constexpr double kC2 = " << buf << ";\n\n}  // namespace cagg::calibration\n";
  }
  return 0;
}
