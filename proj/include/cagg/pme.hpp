#pragma once

// Explicit conservative finite volumes for
//   rho_t = div(rho grad Phi) + Laplace(rho^m) + rho f
// with the drift potential Phi given, frozen from a stored sequence, or
// recomputed as N rho every step.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cagg/error.hpp"
#include "cagg/grid.hpp"
#include "cagg/modulus.hpp"
#include "cagg/newtonian.hpp"

namespace cagg {

enum class DriftMode { external, frozen_sequence, self_consistent };

/// Cells below this fraction of max rho are treated as outside the support.
inline constexpr double kSupportThreshold = 1e-12;

/// Source rate f(x, y, t) in rho_t = ... + rho f.
using SourceRate = std::function<double(double, double, double)>;

struct PMEConfig {
  double m = 2.0;
  DriftMode drift_mode = DriftMode::external;
  double dt_safety = 0.4;
  double t_end = 0.0;
  SourceRate source;  // empty: no source
  int margin_cells = 2;

  void validate() const {
    if (!(m > 1.0) || !std::isfinite(m)) throw domain_error("PMEConfig: m must exceed 1");
    if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw domain_error("PMEConfig: dt_safety must lie in (0, 1]");
    if (!(t_end >= 0.0)) throw domain_error("PMEConfig: t_end must be nonnegative");
  }
};

// ---------------------------------------------------------------------------
// Pressure variable p = m / (m - 1) rho^(m - 1).

struct PressureView {
  ScalarField p;
  double m = 2.0;
};

inline PressureView pressure(const ScalarField& rho, double m) {
  if (!(m > 1.0)) throw domain_error("pressure: m must exceed 1");
  PressureView v{ScalarField(rho.grid()), m};
  const double c = m / (m - 1.0);
  for (std::size_t k = 0; k < rho.grid().size(); ++k) v.p[k] = rho[k] > 0.0 ? c * std::pow(rho[k], m - 1.0) : 0.0;
  return v;
}

inline ScalarField density_from_pressure(const ScalarField& p, double m) {
  if (!(m > 1.0)) throw domain_error("density_from_pressure: m must exceed 1");
  ScalarField rho(p.grid());
  const double c = (m - 1.0) / m;
  for (std::size_t k = 0; k < p.grid().size(); ++k) rho[k] = p[k] > 0.0 ? std::pow(c * p[k], 1.0 / (m - 1.0)) : 0.0;
  return rho;
}

enum class PressureInitialData {
  lemma,       // (m / (m - 1) p0)^(1 / (m - 1))
  consistent,  // ((m - 1) / m p0)^(1 / (m - 1)), the inverse of `pressure`
  patch,       // chi_{p0 > 0}
};

inline ScalarField initial_density(const ScalarField& p0, double m, PressureInitialData kind = PressureInitialData::lemma) {
  if (!(m > 1.0)) throw domain_error("initial_density: m must exceed 1");
  ScalarField rho(p0.grid());
  const double c = kind == PressureInitialData::lemma ? m / (m - 1.0) : (m - 1.0) / m;
  for (std::size_t k = 0; k < p0.grid().size(); ++k) {
    if (!(p0[k] > 0.0)) continue;
    rho[k] = kind == PressureInitialData::patch ? 1.0 : std::pow(c * p0[k], 1.0 / (m - 1.0));
  }
  return rho;
}

// ---------------------------------------------------------------------------
// Barriers.

/// R(t) = (R0 + C_d / d) e^(t / d) - C_d / d.
inline double support_barrier(double t, double r0, const ModulusParams& params = {}, double d = 2.0) {
  return (r0 + params.c_d / d) * std::exp(t / d) - params.c_d / d;
}

/// Smallest R0 the barrier admits: R0 >= 1, supp p0 inside B(R0 / 2), max p0 <= R0^2 / 4d.
inline double barrier_initial_radius(double support_radius0, double p_max0, double d = 2.0) {
  return std::max({1.0, 2.0 * support_radius0, std::sqrt(4.0 * d * std::max(p_max0, 0.0))});
}

inline double height_bound(double m) { return 1.0 + 5.0 / (m - 1.0); }

inline double excess_mass_bound(double m, const ModulusParams& params = {}) {
  return std::sqrt((2.0 + params.c_d * params.c_d) / m);
}

// ---------------------------------------------------------------------------
// Drift sources: return the potential Phi to use at time t for density rho.
// Returning the same pointer as on the previous call marks the drift unchanged.

using DriftSource = std::function<std::shared_ptr<const ScalarField>(double t, const ScalarField& rho)>;

inline DriftSource external_drift(ScalarField phi) {
  auto p = std::make_shared<const ScalarField>(std::move(phi));
  return [p](double, const ScalarField&) { return p; };
}

inline DriftSource zero_drift(const GridSpec& g) { return external_drift(ScalarField(g)); }

inline DriftSource self_consistent_drift(int margin_cells = 4) {
  return [margin_cells](double, const ScalarField& rho) {
    return std::make_shared<const ScalarField>(potential(rho, margin_cells));
  };
}

/// Piecewise constant in time: the snapshot with the largest time <= t.
inline DriftSource frozen_sequence_drift(std::vector<double> times, std::vector<ScalarField> potentials) {
  if (times.empty() || times.size() != potentials.size())
    throw domain_error("frozen_sequence_drift: need matching, nonempty times and potentials");
  if (!std::is_sorted(times.begin(), times.end())) throw domain_error("frozen_sequence_drift: times must be sorted");
  std::vector<std::shared_ptr<const ScalarField>> ptrs;
  for (auto& p : potentials) ptrs.push_back(std::make_shared<const ScalarField>(std::move(p)));
  return [times = std::move(times), ptrs = std::move(ptrs)](double t, const ScalarField&) {
    const auto it = std::upper_bound(times.begin(), times.end(), t + 1e-12);
    const std::size_t k = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    return ptrs[k];
  };
}

// ---------------------------------------------------------------------------

namespace detail {

inline double max_face_speed(const ScalarField& phi) {
  const auto& g = phi.grid();
  double v = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) v = std::max(v, std::fabs(phi(i + 1, j) - phi(i, j)));
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) v = std::max(v, std::fabs(phi(i, j + 1) - phi(i, j)));
  return v / g.h;
}

/// rho^m on the bounding box of the support, plus what the CFL rule needs.
struct PreparedDensity {
  std::vector<double> pm;
  int i0 = 0, i1 = -1, j0 = 0, j1 = -1;  // support bounding box, empty when i1 < i0
  double max_rho = 0.0;
  double max_diffusivity = 0.0;  // max m rho^(m-1)
  int margin = std::numeric_limits<int>::max();  // cells from the thresholded support to the box edge
};

inline void prepare(const ScalarField& rho, double m, PreparedDensity& out) {
  const auto& g = rho.grid();
  out.pm.assign(g.size(), 0.0);
  out.i0 = g.nx, out.i1 = -1, out.j0 = g.ny, out.j1 = -1;
  out.max_rho = 0.0;
  out.max_diffusivity = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double r = rho(i, j);
      if (!(r > 0.0)) continue;
      out.i0 = std::min(out.i0, i), out.i1 = std::max(out.i1, i);
      out.j0 = std::min(out.j0, j), out.j1 = std::max(out.j1, j);
      out.max_rho = std::max(out.max_rho, r);
      const double p = std::pow(r, m);
      out.pm[g.index(i, j)] = p;
      out.max_diffusivity = std::max(out.max_diffusivity, m * p / r);
    }
  out.margin = std::numeric_limits<int>::max();
  if (out.i1 < out.i0) return;
  const double thr = kSupportThreshold * out.max_rho;
  for (int j = out.j0; j <= out.j1; ++j)
    for (int i = out.i0; i <= out.i1; ++i)
      if (rho(i, j) > thr) out.margin = std::min({out.margin, i, j, g.nx - 1 - i, g.ny - 1 - j});
}

inline double cfl_dt(const PreparedDensity& prep, double h, double face_speed, double safety) {
  const double denom = 4.0 * prep.max_diffusivity + 2.0 * h * face_speed;
  return denom > 0.0 ? safety * h * h / denom : std::numeric_limits<double>::infinity();
}

/// Explicit update on the support box grown by one cell; the rest stays zero.
inline ScalarField apply_step(const ScalarField& rho, const PreparedDensity& prep, const PMEConfig& cfg,
                              const ScalarField& phi, double dt, double t) {
  const auto& g = rho.grid();
  if (cfg.margin_cells > 0 && prep.margin < cfg.margin_cells)
    // explicit degenerate diffusion spreads round-off sized values one cell per step,
    // so the margin is measured on the thresholded support
    throw solver_error("pme::step: support within " + std::to_string(prep.margin) + " cells of the box edge (need " +
                       std::to_string(cfg.margin_cells) + ")");
  ScalarField out = rho;
  if (prep.i1 < prep.i0) return out;
  const double h = g.h;
  const double lam = dt / h;
  const auto& pm = prep.pm;
  // face flux from cell a to cell b (positive = mass moving a -> b)
  auto face = [&](std::size_t a, std::size_t b) {
    const double diff = (pm[a] - pm[b]) / h;
    const double u = -(phi[b] - phi[a]) / h;  // velocity -grad Phi at the face
    const double adv = u > 0.0 ? u * rho[a] : u * rho[b];
    const double flux = lam * (diff + adv);
    out[a] -= flux;
    out[b] += flux;
  };
  const int i0 = std::max(prep.i0 - 1, 0), i1 = std::min(prep.i1 + 1, g.nx - 1);
  const int j0 = std::max(prep.j0 - 1, 0), j1 = std::min(prep.j1 + 1, g.ny - 1);
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i < i1; ++i) face(g.index(i, j), g.index(i + 1, j));
  for (int j = j0; j < j1; ++j)
    for (int i = i0; i <= i1; ++i) face(g.index(i, j), g.index(i, j + 1));

  if (cfg.source)
    for (int j = prep.j0; j <= prep.j1; ++j)
      for (int i = prep.i0; i <= prep.i1; ++i) out(i, j) += dt * rho(i, j) * cfg.source(g.x(i), g.y(j), t);

  const double floor = -1e-13 * std::max(prep.max_rho, 1e-300);
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      double& v = out(i, j);
      if (v >= 0.0) continue;
      if (v < floor) throw solver_error("pme::step: negative density " + std::to_string(v), v);
      v = 0.0;
    }
  return out;
}

}  // namespace detail

/// dt_safety * h^2 / (4 max(m rho^(m-1)) + 2 h max|grad Phi|).
inline double stable_dt(const ScalarField& rho, const PMEConfig& cfg, const ScalarField& phi) {
  detail::PreparedDensity prep;
  detail::prepare(rho, cfg.m, prep);
  return detail::cfl_dt(prep, rho.grid().h, detail::max_face_speed(phi), cfg.dt_safety);
}

/// One explicit step of length dt: diffusive face flux from differences of
/// rho^m, upwind advective flux rho u with u = -grad Phi on faces. Faces on the
/// box edge carry no flux. The source (if any) is evaluated at time t.
inline ScalarField step(const ScalarField& rho, const PMEConfig& cfg, const ScalarField& phi, double dt,
                        double t = 0.0) {
  require_same_grid(rho.grid(), phi.grid(), "pme::step");
  if (!(dt > 0.0)) throw domain_error("pme::step: dt must be positive");
  detail::PreparedDensity prep;
  detail::prepare(rho, cfg.m, prep);
  const double limit = detail::cfl_dt(prep, rho.grid().h, detail::max_face_speed(phi), 1.0);
  if (dt > limit * (1.0 + 1e-12)) throw solver_error("pme::step: dt exceeds the CFL bound", dt / limit);
  return detail::apply_step(rho, prep, cfg, phi, dt, t);
}

/// One step with dt from the CFL rule.
inline ScalarField step(const ScalarField& rho, const PMEConfig& cfg, const ScalarField& phi) {
  const double dt = stable_dt(rho, cfg, phi);
  if (!std::isfinite(dt)) return rho;
  return step(rho, cfg, phi, dt);
}

// ---------------------------------------------------------------------------

class PMESolver {
 public:
  PMESolver(ScalarField rho0, PMEConfig cfg, DriftSource drift)
      : rho_(std::move(rho0)), cfg_(std::move(cfg)), drift_(std::move(drift)) {
    cfg_.validate();
    if (!rho_.all_finite() || !rho_.nonnegative()) throw domain_error("PMESolver: initial density must be finite and >= 0");
    if (!drift_) throw domain_error("PMESolver: no drift source");
  }

  double time() const { return t_; }
  long steps() const { return steps_; }
  const ScalarField& density() const { return rho_; }
  const PMEConfig& config() const { return cfg_; }
  /// Drift potential used by the last step (null before the first).
  const ScalarField* drift() const { return phi_.get(); }

  /// Advances one CFL step, not past t_limit. Returns dt.
  double advance(double t_limit) {
    refresh_drift();
    detail::prepare(rho_, cfg_.m, prep_);
    double dt = detail::cfl_dt(prep_, rho_.grid().h, face_speed_, cfg_.dt_safety);
    dt = std::min(dt, t_limit - t_);
    if (!(dt > 0.0)) throw solver_error("PMESolver: no time left to advance");
    rho_ = detail::apply_step(rho_, prep_, cfg_, *phi_, dt, t_);
    t_ += dt;
    ++steps_;
    return dt;
  }

  void advance_to(double t_end, const std::function<void(const PMESolver&)>& on_step = {}) {
    while (t_ < t_end - 1e-14 * std::max(1.0, t_end)) {
      advance(t_end);
      if (on_step) on_step(*this);
    }
  }

 private:
  void refresh_drift() {
    auto next = drift_(t_, rho_);
    if (!next) throw solver_error("PMESolver: drift source returned no field");
    require_same_grid(rho_.grid(), next->grid(), "PMESolver drift");
    if (next != phi_) {
      phi_ = std::move(next);
      face_speed_ = detail::max_face_speed(*phi_);
    }
  }

  ScalarField rho_;
  PMEConfig cfg_;
  DriftSource drift_;
  std::shared_ptr<const ScalarField> phi_;
  double face_speed_ = 0.0;
  detail::PreparedDensity prep_;
  double t_ = 0.0;
  long steps_ = 0;
};

struct PMETrajectory {
  ScalarField final_density;
  double t = 0.0;
  long steps = 0;
};

/// Runs to cfg.t_end. `recorder` sees the solver at t = 0 and then every
/// `record_dt` of simulated time (every step when record_dt <= 0), and at the end.
inline PMETrajectory run(const ScalarField& rho0, const PMEConfig& cfg, const DriftSource& drift,
                         const std::function<void(const PMESolver&)>& recorder = {}, double record_dt = 0.0) {
  PMESolver solver(rho0, cfg, drift);
  if (recorder) recorder(solver);
  double next = record_dt;
  while (solver.time() < cfg.t_end - 1e-14 * std::max(1.0, cfg.t_end)) {
    const double target = record_dt > 0.0 ? std::min(next, cfg.t_end) : cfg.t_end;
    solver.advance(target);
    if (!recorder) continue;
    const bool at_end = solver.time() >= cfg.t_end - 1e-14 * std::max(1.0, cfg.t_end);
    if (record_dt <= 0.0 || solver.time() >= next - 1e-14 || at_end) {
      recorder(solver);
      while (record_dt > 0.0 && next <= solver.time() + 1e-14) next += record_dt;
    }
  }
  return {solver.density(), solver.time(), solver.steps()};
}

// ---------------------------------------------------------------------------

struct ContractionReport {
  double initial = 0.0;  // ||rho1(0) - rho2(0)||_1
  double final = 0.0;    // ||rho1(t) - rho2(t)||_1
  double max_ratio = 0.0;  // max over steps of distance / initial distance
  bool ok = true;        // final <= initial * (1 + slack)
};

/// Evolves both densities with the same drift and steps (the smaller CFL step
/// of the two), tracking their L1 distance.
inline ContractionReport l1_contraction_test(const ScalarField& rho1, const ScalarField& rho2, const PMEConfig& cfg,
                                             const ScalarField& phi, double t, double slack = 0.02) {
  require_same_grid(rho1.grid(), rho2.grid(), "l1_contraction_test");
  ContractionReport rep;
  rep.initial = lp_distance(rho1, rho2, 1.0);
  ScalarField a = rho1, b = rho2;
  double s = 0.0;
  rep.max_ratio = rep.initial > 0.0 ? 1.0 : 0.0;
  while (s < t - 1e-14) {
    const double dt = std::min({stable_dt(a, cfg, phi), stable_dt(b, cfg, phi), t - s});
    if (!std::isfinite(dt)) break;
    a = step(a, cfg, phi, dt, s);
    b = step(b, cfg, phi, dt, s);
    s += dt;
    if (rep.initial > 0.0) rep.max_ratio = std::max(rep.max_ratio, lp_distance(a, b, 1.0) / rep.initial);
  }
  rep.final = lp_distance(a, b, 1.0);
  rep.ok = rep.final <= rep.initial * (1.0 + slack);
  return rep;
}

// ---------------------------------------------------------------------------

/// Barenblatt source solution rho(x, t) = t^-a (C0 - k |x|^2 t^(-2b))_+^(1/(m-1)),
/// a = d / (d(m-1) + 2), b = a / d, k = a (m-1) / (2 m d), centred at the origin.
struct Barenblatt {
  double m = 2.0;
  double c0 = 0.25;
  double d = 2.0;

  double alpha() const { return d / (d * (m - 1.0) + 2.0); }
  double beta() const { return alpha() / d; }
  double k() const { return alpha() * (m - 1.0) / (2.0 * m * d); }

  double operator()(double x, double y, double t) const {
    const double base = c0 - k() * (x * x + y * y) * std::pow(t, -2.0 * beta());
    if (base <= 0.0) return 0.0;
    return std::pow(t, -alpha()) * std::pow(base, 1.0 / (m - 1.0));
  }

  double support_radius(double t) const { return std::sqrt(c0 / k()) * std::pow(t, beta()); }

  ScalarField sample(const GridSpec& g, double t) const {
    return ScalarField::sample(g, [&](double x, double y) { return (*this)(x, y, t); });
  }

  /// Cell averages by n x n midpoint subsampling.
  ScalarField cell_average(const GridSpec& g, double t, int n = 8) const {
    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        double s = 0.0;
        for (int b = 0; b < n; ++b)
          for (int a = 0; a < n; ++a)
            s += (*this)(g.x(i) + g.h * ((a + 0.5) / n - 0.5), g.y(j) + g.h * ((b + 0.5) / n - 0.5), t);
        out(i, j) = s / (n * n);
      }
    return out;
  }
};

}  // namespace cagg
