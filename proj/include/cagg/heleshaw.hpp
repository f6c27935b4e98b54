#pragma once

// Level-set evolution of a patch under the free-boundary law
//   -Laplace p = 1 in Omega, p = 0 outside,  V = -nu . (grad p + grad Phi),  Phi = N chi_Omega,
// with nu the outward normal and V the outward normal speed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cagg/error.hpp"
#include "cagg/grid.hpp"
#include "cagg/levelset.hpp"
#include "cagg/newtonian.hpp"
#include "cagg/poisson.hpp"

namespace cagg {

struct HeleShawConfig {
  // dt <= cfl * h / max(|V|, |d_nu p|): the normal pressure gradient sets the
  // decay rate of grid-scale boundary modes, so it bounds dt even when V ~ 0.
  double cfl = 0.5;
  double dt_max = 0.05;  // cap once the patch is nearly stationary
  int reinit_every = 5;
  bool volume_correction = true;
  double band_cells = 6.0;  // velocity lives on |phi| <= band_cells * h
  int margin_cells = 4;
  PoissonOptions poisson{};
};

/// Solves the Dirichlet problem on a mask (the mask's level set if it carries one).
inline PressureSolve initial_pressure(const PatchMask& mask, const PoissonOptions& opt = {}) {
  if (mask.empty()) throw domain_error("initial_pressure: empty mask");
  return solve_pressure(level_set_from_mask(mask), opt);
}

struct VelocityField {
  std::vector<double> speed;     // extended outward normal speed on the band, zero elsewhere
  double max_interface = 0.0;    // max |V| over interface seed cells
  double max_band = 0.0;         // max |V| over the band
  double max_grad_p = 0.0;       // max |d_nu p| over interface seed cells
};

/// Outward normal speed -(grad p + grad Phi) . nu at inside interface cells,
/// extended along normals to the band |phi| <= band.
inline VelocityField boundary_velocity(const LevelSet& ls, const ScalarField& p, const VectorField& grad_phi,
                                       double band, double theta_min = 1e-2) {
  const auto& g = ls.grid;
  VelocityField out;
  out.speed.assign(g.size(), 0.0);
  std::vector<std::uint8_t> known(g.size(), 0);
  const auto iface = interface_cells(ls);
  for (int j = 1; j + 1 < g.ny; ++j)
    for (int i = 1; i + 1 < g.nx; ++i) {
      const std::size_t id = g.index(i, j);
      if (std::fabs(ls.phi[id]) > band) continue;
      auto [nx, ny] = detail::phi_gradient(ls, i, j);
      const double norm = std::hypot(nx, ny);
      if (norm < 0.1)
        throw solver_error("boundary_velocity: degenerate |grad phi| = " + std::to_string(norm) +
                           " in band; reinitialize first");
      if (!iface[id] || !(ls.phi[id] < 0.0)) continue;
      const double px = pressure_derivative(ls, p, i, j, true, theta_min);
      const double py = pressure_derivative(ls, p, i, j, false, theta_min);
      const double v = -((px + grad_phi.x(i, j)) * nx + (py + grad_phi.y(i, j)) * ny) / norm;
      out.max_grad_p = std::max(out.max_grad_p, std::fabs(px * nx + py * ny) / norm);
      out.speed[id] = v;
      known[id] = 1;
      out.max_interface = std::max(out.max_interface, std::fabs(v));
    }
  extend_velocity(ls, out.speed, known, band);
  for (double v : out.speed) out.max_band = std::max(out.max_band, std::fabs(v));
  return out;
}

/// Convenience overload: Phi = N chi_Omega from the level set's cut-cell fractions.
inline VelocityField boundary_velocity(const LevelSet& ls, const ScalarField& p, double band_cells = 6.0) {
  const auto mask = patch_mask(ls);
  return boundary_velocity(ls, p, grad_potential(mask.density()), band_cells * ls.grid.h);
}

struct HeleShawRecord {
  double t = 0.0;
  double area = 0.0;
  double m2 = 0.0;
  Point com{0.0, 0.0};
  double pressure_integral = 0.0;  // int_Omega p
  double f_value = 0.0;            // -|Omega|^2 / 2 pi + 4 int p
  double max_speed = 0.0;          // max |V| at the interface
};

class HeleShawSolver {
 public:
  HeleShawSolver(LevelSet ls, HeleShawConfig cfg = {})
      : ls_(std::move(ls)), cfg_(cfg), newton_(ls_.grid, 0) {
    if (!(cfg_.cfl > 0.0 && cfg_.cfl <= 1.0)) throw domain_error("HeleShawConfig: cfl must lie in (0, 1]");
    if (cfg_.reinit_every < 1) throw domain_error("HeleShawConfig: reinit_every must be >= 1");
    reinitialize(ls_);
    area0_ = area(ls_);
    if (!(area0_ > 0.0)) throw domain_error("HeleShawSolver: empty initial patch");
    refresh();
  }

  double time() const { return t_; }
  int steps() const { return steps_; }
  double initial_area() const { return area0_; }
  const LevelSet& level_set() const { return ls_; }
  const PressureSolve& pressure() const { return pressure_; }
  const ScalarField& potential_field() const { return potential_; }
  const VelocityField& velocity() const { return velocity_; }
  const PatchMask& mask() const { return mask_; }
  const HeleShawConfig& config() const { return cfg_; }

  HeleShawRecord record() const {
    HeleShawRecord r;
    r.t = t_;
    const auto rho = mask_.density();
    r.area = mask_.area();
    r.m2 = second_moment(rho);
    r.com = center_of_mass(rho);
    r.pressure_integral = mass(pressure_.p);
    r.f_value = -r.area * r.area / (2.0 * kPi) + 4.0 * r.pressure_integral;
    r.max_speed = velocity_.max_interface;
    return r;
  }

  /// Advances by one step no longer than `dt_limit`; returns the step taken.
  double step(double dt_limit = std::numeric_limits<double>::infinity()) {
    const double h = ls_.grid.h;
    const double vmax = std::max({velocity_.max_band, velocity_.max_grad_p, 1e-12});
    const double dt = std::min({cfg_.cfl * h / vmax, cfg_.dt_max, dt_limit});
    if (!(dt > 0.0)) throw solver_error("HeleShawSolver: non-positive time step");
    advect(ls_, velocity_.speed, dt);
    ++steps_;
    if (steps_ % cfg_.reinit_every == 0) reinitialize(ls_);
    if (cfg_.volume_correction) volume_correct(ls_, area0_);
    t_ += dt;
    refresh();
    return dt;
  }

  void advance_to(double t_end, const std::function<void(const HeleShawSolver&)>& on_step = {}) {
    while (t_ < t_end - 1e-12) {
      step(t_end - t_);
      if (on_step) on_step(*this);
    }
  }

 private:
  void check_margin() const {
    const auto& g = ls_.grid;
    const int m = cfg_.margin_cells;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if ((i < m || j < m || i >= g.nx - m || j >= g.ny - m) && ls_(i, j) < 0.0)
          throw solver_error("HeleShawSolver: patch within " + std::to_string(m) + " cells of the box edge at t = " +
                             std::to_string(t_));
  }

  void refresh() {
    check_margin();
    mask_ = patch_mask(ls_);
    pressure_ = solve_pressure(ls_, cfg_.poisson, pressure_.p.grid().size() ? &pressure_.p : nullptr);
    potential_ = newton_.potential(mask_.density());
    const auto grad = centered_gradient(potential_);
    velocity_ = boundary_velocity(ls_, pressure_.p, grad, cfg_.band_cells * ls_.grid.h, cfg_.poisson.theta_min);
  }

  LevelSet ls_;
  HeleShawConfig cfg_;
  NewtonianSolver newton_;
  double t_ = 0.0;
  int steps_ = 0;
  double area0_ = 0.0;
  PatchMask mask_;
  PressureSolve pressure_;
  ScalarField potential_;
  VelocityField velocity_;
};

struct HeleShawTrajectory {
  std::vector<HeleShawRecord> records;
  std::vector<std::pair<double, LevelSet>> snapshots;
  LevelSet final_state;
};

/// Runs to t_end, recording after every step. Snapshots of the level set are
/// kept every `snapshot_dt` (0 disables). `recorder`, when set, sees the solver
/// at t = 0 and after every step.
inline HeleShawTrajectory evolve(const LevelSet& ls, double t_end, const HeleShawConfig& cfg = {},
                                 double snapshot_dt = 0.0,
                                 const std::function<void(const HeleShawSolver&)>& recorder = {}) {
  HeleShawSolver solver(ls, cfg);
  HeleShawTrajectory traj;
  double next_snapshot = 0.0;
  auto on_step = [&](const HeleShawSolver& s) {
    traj.records.push_back(s.record());
    if (snapshot_dt > 0.0 && s.time() >= next_snapshot - 1e-12) {
      traj.snapshots.emplace_back(s.time(), s.level_set());
      next_snapshot += snapshot_dt;
    }
    if (recorder) recorder(s);
  };
  on_step(solver);
  while (solver.time() < t_end - 1e-12) {
    double limit = t_end - solver.time();
    if (snapshot_dt > 0.0) limit = std::min(limit, std::max(next_snapshot - solver.time(), 1e-9));
    solver.step(limit);
    on_step(solver);
  }
  traj.final_state = solver.level_set();
  return traj;
}

}  // namespace cagg
