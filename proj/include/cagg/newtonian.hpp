#pragma once

// Free-space 2-D Newtonian potential N*rho with N(x) = log|x| / (2 pi), its
// gradient, the mollified drift psi_{1/m} * N rho, and a sampling check of the
// log-Lipschitz bound on grad N rho.

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <tuple>
#include <utility>

#include "cagg/fft.hpp"
#include "cagg/grid.hpp"
#include "cagg/modulus.hpp"

namespace cagg {

inline constexpr double kPi = std::numbers::pi;

/// Mean of log|x| over the square [-1, 1]^2.
inline constexpr double kMeanLogUnitSquare = 0.34657359027997265 + 0.78539816339744831 - 1.5;

enum class GradientMode { centered, kernel };

struct VectorField {
  ScalarField x;
  ScalarField y;
};

/// Central differences in the interior, one-sided at the box edge.
inline VectorField centered_gradient(const ScalarField& f) {
  const auto& g = f.grid();
  VectorField out{ScalarField(g), ScalarField(g)};
  const double inv2h = 0.5 / g.h;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (g.nx > 1) {
        if (i == 0) out.x(i, j) = (f(1, j) - f(0, j)) / g.h;
        else if (i == g.nx - 1) out.x(i, j) = (f(i, j) - f(i - 1, j)) / g.h;
        else out.x(i, j) = (f(i + 1, j) - f(i - 1, j)) * inv2h;
      }
      if (g.ny > 1) {
        if (j == 0) out.y(i, j) = (f(i, 1) - f(i, 0)) / g.h;
        else if (j == g.ny - 1) out.y(i, j) = (f(i, j) - f(i, j - 1)) / g.h;
        else out.y(i, j) = (f(i, j + 1) - f(i, j - 1)) * inv2h;
      }
    }
  return out;
}

/// Five-point Laplacian; zero on the outermost ring of cells.
inline ScalarField laplacian(const ScalarField& f) {
  const auto& g = f.grid();
  ScalarField out(g);
  const double inv = 1.0 / (g.h * g.h);
  for (int j = 1; j + 1 < g.ny; ++j)
    for (int i = 1; i + 1 < g.nx; ++i)
      out(i, j) = (f(i + 1, j) + f(i - 1, j) + f(i, j + 1) + f(i, j - 1) - 4.0 * f(i, j)) * inv;
  return out;
}

class NewtonianSolver {
 public:
  /// `margin_cells`: minimum distance of supp rho from the box edge; 0 disables the check.
  explicit NewtonianSolver(const GridSpec& grid, int margin_cells = 4)
      : grid_(grid),
        margin_cells_(margin_cells),
        potential_(grid, [h = grid.h](int di, int dj) { return potential_kernel(di, dj, h); }) {}

  const GridSpec& grid() const { return grid_; }

  /// Cell-averaged kernel weight times h^2 for cell offset (di, dj). The self
  /// cell uses the exact mean of log|x| over the cell, neighbours the centre value.
  static double potential_kernel(int di, int dj, double h) {
    const double area = h * h;
    if (di == 0 && dj == 0) return area / (2.0 * kPi) * (std::log(0.5 * h) + kMeanLogUnitSquare);
    return area / (2.0 * kPi) * std::log(h * std::hypot(static_cast<double>(di), static_cast<double>(dj)));
  }

  ScalarField potential(const ScalarField& rho) const {
    check(rho);
    return potential_.apply(rho);
  }

  VectorField grad_potential(const ScalarField& rho, GradientMode mode = GradientMode::centered) const {
    if (mode == GradientMode::centered) return centered_gradient(potential(rho));
    check(rho);
    std::call_once(gradient_once_, [this] {
      const double h = grid_.h;
      auto gx = [h](int di, int dj) {
        if (di == 0 && dj == 0) return 0.0;
        return h * h / (2.0 * kPi) * (di * h) / (h * h * (double(di) * di + double(dj) * dj));
      };
      auto gy = [h](int di, int dj) {
        if (di == 0 && dj == 0) return 0.0;
        return h * h / (2.0 * kPi) * (dj * h) / (h * h * (double(di) * di + double(dj) * dj));
      };
      grad_x_ = std::make_unique<FreeSpaceConvolver>(grid_, gx);
      grad_y_ = std::make_unique<FreeSpaceConvolver>(grid_, gy);
    });
    return {grad_x_->apply(rho), grad_y_->apply(rho)};
  }

 private:
  void check(const ScalarField& rho) const {
    require_same_grid(grid_, rho.grid(), "NewtonianSolver");
    if (!rho.all_finite()) throw domain_error("potential: density has non-finite values");
    if (margin_cells_ > 0) require_margin(rho, margin_cells_, "potential", 1e-14 * std::max(rho.max(), 0.0));
  }

  GridSpec grid_;
  int margin_cells_;
  FreeSpaceConvolver potential_;
  mutable std::once_flag gradient_once_;
  mutable std::unique_ptr<FreeSpaceConvolver> grad_x_;
  mutable std::unique_ptr<FreeSpaceConvolver> grad_y_;
};

namespace detail {

/// One solver per grid, shared by the free-function interface.
inline const NewtonianSolver& cached_solver(const GridSpec& g, int margin_cells) {
  static std::mutex m;
  static std::map<std::tuple<int, int, double, double, double, int>, std::unique_ptr<NewtonianSolver>> cache;
  std::lock_guard lock(m);
  auto key = std::make_tuple(g.nx, g.ny, g.h, g.ox, g.oy, margin_cells);
  auto it = cache.find(key);
  if (it == cache.end()) {
    if (cache.size() > 16) cache.clear();
    it = cache.emplace(key, std::make_unique<NewtonianSolver>(g, margin_cells)).first;
  }
  return *it->second;
}

}  // namespace detail

inline ScalarField potential(const ScalarField& rho, int margin_cells = 4) {
  return detail::cached_solver(rho.grid(), margin_cells).potential(rho);
}

inline VectorField grad_potential(const ScalarField& rho, GradientMode mode = GradientMode::centered,
                                  int margin_cells = 4) {
  return detail::cached_solver(rho.grid(), margin_cells).grad_potential(rho, mode);
}

/// (1/2) int rho N rho, with no height constraint.
inline double interaction_energy(const ScalarField& rho, int margin_cells = 4) {
  const auto phi = potential(rho, margin_cells);
  double s = 0.0;
  for (std::size_t k = 0; k < rho.grid().size(); ++k) s += rho[k] * phi[k];
  return 0.5 * s * rho.grid().cell_area();
}

/// (1/2) int chi N chi for the disk of radius r.
inline double disk_interaction_energy(double r) {
  const double r4 = r * r * r * r;
  return -kPi * r4 / 16.0 + kPi * r4 / 4.0 * std::log(r);
}

// ---------------------------------------------------------------------------
// Mollifier psi(x) = (5/pi) (1 - |x|^2)^4 on the unit disk, rescaled to psi_s(x) = psi(x/s)/s^2.

struct MollifierSpec {
  double scale = 0.0;

  static constexpr double kProfileNormalization = 5.0 / kPi;

  static double profile(double r) {
    if (r >= 1.0) return 0.0;
    const double u = 1.0 - r * r;
    return kProfileNormalization * u * u * u * u;
  }

  static MollifierSpec for_m(double m) {
    if (!(m > 1.0)) throw domain_error("MollifierSpec: m must exceed 1");
    MollifierSpec s{1.0 / m};
    s.validate();
    return s;
  }

  double r_psi() const { return scale; }
  /// (int |x|^2 psi_s)^(1/2); the unscaled profile has second moment 1/6.
  double m_psi() const { return scale * std::sqrt(1.0 / 6.0); }

  /// Checks positivity of the scale and that the profile integrates to one
  /// (composite Simpson on the radial integral, exact for this polynomial).
  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw domain_error("MollifierSpec: scale must be positive");
    const int n = 2000;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double r = static_cast<double>(k) / n;
      const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      s += w * profile(r) * 2.0 * kPi * r;
    }
    s /= 3.0 * n;
    if (std::fabs(s - 1.0) > 1e-10) throw solver_error("MollifierSpec: profile normalization check failed", s - 1.0);
  }

  /// Cell weights on offsets within the support, normalised to sum to one.
  /// Half-width is at least zero cells (pure identity when scale < h / 2).
  struct Stencil {
    int radius = 0;
    std::vector<double> w;  // (2 radius + 1)^2, row-major in (dj, di)
    double operator()(int di, int dj) const {
      const int n = 2 * radius + 1;
      return w[static_cast<std::size_t>(dj + radius) * n + (di + radius)];
    }
  };

  Stencil stencil(double h) const {
    Stencil st;
    st.radius = static_cast<int>(std::floor(scale / h));
    const int n = 2 * st.radius + 1;
    st.w.assign(static_cast<std::size_t>(n) * n, 0.0);
    double total = 0.0;
    for (int dj = -st.radius; dj <= st.radius; ++dj)
      for (int di = -st.radius; di <= st.radius; ++di) {
        const double v = profile(std::hypot(di * h, dj * h) / scale);
        st.w[static_cast<std::size_t>(dj + st.radius) * n + (di + st.radius)] = v;
        total += v;
      }
    if (total <= 0.0) {
      st.w.assign(1, 1.0);
      st.radius = 0;
      return st;
    }
    for (double& v : st.w) v /= total;
    return st;
  }
};

/// psi_s * f with the stencil clamped at the box edge.
inline ScalarField mollify(const ScalarField& f, const MollifierSpec& spec) {
  const auto& g = f.grid();
  const auto st = spec.stencil(g.h);
  if (st.radius == 0) return f;
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      double s = 0.0;
      for (int dj = -st.radius; dj <= st.radius; ++dj) {
        const int jj = std::clamp(j + dj, 0, g.ny - 1);
        for (int di = -st.radius; di <= st.radius; ++di) {
          const int ii = std::clamp(i + di, 0, g.nx - 1);
          s += st(di, dj) * f(ii, jj);
        }
      }
      out(i, j) = s;
    }
  return out;
}

/// Phi_{1/m} = psi_{1/m} * N rho.
inline ScalarField mollified_drift(const ScalarField& rho, double m, const MollifierSpec& spec, int margin_cells = 4) {
  if (!(m > 1.0)) throw domain_error("mollified_drift: m must exceed 1");
  return mollify(potential(rho, margin_cells), spec);
}

inline ScalarField mollified_drift(const ScalarField& rho, double m, int margin_cells = 4) {
  return mollified_drift(rho, m, MollifierSpec::for_m(m), margin_cells);
}

struct LogLipschitzReport {
  double max_ratio = 0.0;  // max |grad Phi(x) - grad Phi(y)| / (C_d sigma(|x - y|))
  int samples = 0;
  int violations = 0;  // ratios above `margin`
  double margin = 1.5;
};

/// Samples cell pairs and compares gradient differences against C_d sigma(|x - y|).
inline LogLipschitzReport log_lipschitz_check(const ScalarField& rho, const ModulusParams& params = {},
                                              int samples = 20000, std::uint64_t seed = 1, double margin = 1.5) {
  const auto grad = grad_potential(rho);
  const auto& g = rho.grid();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> di(0, g.nx - 1), dj(0, g.ny - 1);
  LogLipschitzReport rep;
  rep.margin = margin;
  for (int s = 0; s < samples; ++s) {
    const int i1 = di(rng), j1 = dj(rng);
    // half the pairs are local (within 8 cells) to probe the log-Lipschitz regime
    int i2, j2;
    if (s % 2 == 0) {
      std::uniform_int_distribution<int> off(-8, 8);
      i2 = std::clamp(i1 + off(rng), 0, g.nx - 1);
      j2 = std::clamp(j1 + off(rng), 0, g.ny - 1);
    } else {
      i2 = di(rng);
      j2 = dj(rng);
    }
    if (i1 == i2 && j1 == j2) continue;
    const double dist = std::hypot((i1 - i2) * g.h, (j1 - j2) * g.h);
    const double diff = std::hypot(grad.x(i1, j1) - grad.x(i2, j2), grad.y(i1, j1) - grad.y(i2, j2));
    const double ratio = diff / (params.c_d * sigma(dist));
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    ++rep.samples;
    if (ratio > margin) ++rep.violations;
  }
  return rep;
}

}  // namespace cagg
