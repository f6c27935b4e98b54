#pragma once

// Entropic JKO steps
//   rho_tau in argmin (1/2tau) W2^2(rho, nu) + E(nu)
// for E_inf, the frozen-potential energy and the power-entropy energy with
// frozen drift. The plan gamma_ij = exp((f_i + g_j - |x_i - y_j|^2)/eps) is
// found by alternating KL projections: its first marginal is held at rho, its
// second is the KL-prox of 2 tau E.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cagg/error.hpp"
#include "cagg/grid.hpp"
#include "cagg/newtonian.hpp"
#include "cagg/sinkhorn.hpp"

namespace cagg {

enum class EnergyKind { constrained_interaction, frozen_potential, power_entropy_frozen };

inline const char* to_string(EnergyKind k) {
  switch (k) {
    case EnergyKind::constrained_interaction: return "constrained_interaction";
    case EnergyKind::frozen_potential: return "frozen_potential";
    case EnergyKind::power_entropy_frozen: return "power_entropy_frozen";
  }
  return "?";
}

struct EnergySpec {
  EnergyKind kind = EnergyKind::constrained_interaction;
  std::optional<ScalarField> frozen_mu;
  std::optional<double> m;
  std::optional<MollifierSpec> mollifier;
  double height_tol = 1e-6;  // same role as kHeightTol

  static EnergySpec constrained() { return {}; }
  static EnergySpec frozen(ScalarField mu) {
    EnergySpec s;
    s.kind = EnergyKind::frozen_potential;
    s.frozen_mu = std::move(mu);
    return s;
  }
  static EnergySpec power(ScalarField mu, double m) {
    EnergySpec s;
    s.kind = EnergyKind::power_entropy_frozen;
    s.frozen_mu = std::move(mu);
    s.m = m;
    s.mollifier = MollifierSpec::for_m(m);
    return s;
  }

  bool constrained_kind() const { return kind != EnergyKind::power_entropy_frozen; }

  void validate() const {
    if (kind == EnergyKind::constrained_interaction) return;
    if (!frozen_mu) throw domain_error(std::string("EnergySpec: ") + to_string(kind) + " needs frozen_mu");
    if (frozen_mu->max() > 1.0 + height_tol)
      throw domain_error("EnergySpec: frozen_mu exceeds the height constraint (max " +
                         std::to_string(frozen_mu->max()) + ")");
    if (kind == EnergyKind::power_entropy_frozen) {
      if (!m || !(*m > 1.0)) throw domain_error("EnergySpec: power_entropy_frozen needs m > 1");
      if (mollifier) mollifier->validate();
    }
  }
};

/// The potential that multiplies rho in the energy: N mu, or psi_{1/m} * N mu.
inline ScalarField frozen_potential(const EnergySpec& spec) {
  spec.validate();
  if (spec.kind == EnergyKind::frozen_potential) return potential(*spec.frozen_mu);
  if (spec.kind == EnergyKind::power_entropy_frozen)
    return mollified_drift(*spec.frozen_mu, *spec.m, spec.mollifier ? *spec.mollifier : MollifierSpec::for_m(*spec.m));
  throw domain_error("frozen_potential: E_inf has no frozen potential");
}

inline double pairing(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid(), "pairing");
  double s = 0.0;
  for (std::size_t k = 0; k < a.grid().size(); ++k) s += a[k] * b[k];
  return s * a.grid().cell_area();
}

/// E(rho); +infinity when a height-constrained energy sees max rho > 1 + tol.
inline double energy(const ScalarField& rho, const EnergySpec& spec) {
  spec.validate();
  const double inf = std::numeric_limits<double>::infinity();
  if (spec.constrained_kind() && rho.max() > 1.0 + spec.height_tol) return inf;
  switch (spec.kind) {
    case EnergyKind::constrained_interaction: return interaction_energy(rho);
    case EnergyKind::frozen_potential: return pairing(rho, potential(*spec.frozen_mu));
    case EnergyKind::power_entropy_frozen: {
      const double m = *spec.m;
      double s = 0.0;
      for (double v : rho.values()) s += std::pow(v, m);
      return s * rho.grid().cell_area() / (m - 1.0) + pairing(rho, frozen_potential(spec));
    }
  }
  return inf;
}

inline constexpr double kDensityFloor = 1e-13;
/// Slack on rho <= 1 for inputs: entropic outputs overshoot the cap by about the marginal tolerance.
inline constexpr double kHeightTol = 1e-6;

struct JKOOptions {
  double eps_cells = 0.5;  // eps = eps_cells * h^2
  double tol = 1e-9;       // L1 violation of the first marginal, relative to mass
  int max_iterations = 10000;
  int margin_cells = 4;    // the output must stay this far from the box edge
  double scaling = 0.5;
  double start_eps_cells = 64.0;
  double stage_tol = 1e-4;
  double relaxation = 1.8;  // over-relaxation of the f-update in the last stage
  double newton_tol = 1e-12;
};

struct JKOStep {
  ScalarField rho_in;
  ScalarField rho_out;
  double tau = 0.0;
  double objective = 0.0;       // <C, gamma>/2tau + E(rho_out), an upper bound for W2^2/2tau + E
  double energy_in = 0.0;
  double energy_out = 0.0;
  double transport_cost = 0.0;  // <C, gamma> >= W2^2(rho_in, rho_out), mass-weighted
  double slack = 0.0;           // eps (sum gamma log gamma at the identity plan - at gamma) / 2tau
  double sinkhorn_eps = 0.0;
  double violation = 0.0;
  int iterations = 0;
  int outer_iterations = 0;     // fixed-point sweeps (constrained_interaction only)
  double fixed_point_residual = 0.0;
};

/// Dual potentials and boxes carried between related solves.
struct JKOWarmStart {
  Box source, target;
  std::vector<double> f, g;
};

namespace detail {

/// Root s of eps (s - q) + 2 tau v + 2 tau m/(m-1) exp((m-1)(s - L)) = 0, L = log h^2.
/// Safeguarded Newton started from the balance of the first and last terms at s = L.
inline double power_prox(double q, double v, double eps, double tau, double m, double L, double tol) {
  const double c = 2.0 * tau * m / (m - 1.0);
  auto G = [&](double s) { return eps * (s - q) + 2.0 * tau * v + c * std::exp((m - 1.0) * (s - L)); };
  double hi = q - 2.0 * tau * v / eps;  // G(hi) >= 0
  double lo = std::min(hi, L) - 1.0;
  for (int k = 0; G(lo) > 0.0; ++k) {
    lo -= std::ldexp(1.0, k);
    if (k > 60) throw solver_error("power_prox: no bracket");
  }
  const double rhs = eps * (q - L) - 2.0 * tau * v;
  double s = rhs > 0.0 ? L + std::log(rhs / c) / (m - 1.0) : lo;
  if (!(s > lo && s < hi)) s = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double e = c * std::exp((m - 1.0) * (s - L));
    const double gs = eps * (s - q) + 2.0 * tau * v + e;
    if (gs > 0.0) hi = s; else lo = s;
    const double ds = gs / (eps + (m - 1.0) * e);
    if (std::fabs(ds) <= tol * std::max(1.0, std::fabs(s)) || hi - lo <= tol) return s - ds;
    s = s - ds;
    if (!(s > lo && s < hi)) s = 0.5 * (lo + hi);
  }
  throw solver_error("power_prox: Newton did not converge");
}

inline double max_gradient(const ScalarField& v, const Box& b) {
  const auto gr = centered_gradient(v);
  double mx = 0.0;
  for (int j = b.j0; j < b.j0 + b.ny; ++j)
    for (int i = b.i0; i < b.i0 + b.nx; ++i) mx = std::max(mx, std::hypot(gr.x(i, j), gr.y(i, j)));
  return mx;
}

}  // namespace detail

/// One entropic step for an energy whose potential V is frozen:
///   Ez(nu) = int V nu [+ 1/(m-1) int nu^m], with the cap nu <= 1 when `cap`.
/// `power_m` <= 0 selects the linear energy.
inline JKOStep frozen_step(const ScalarField& rho, double tau, const ScalarField& V, bool cap, double power_m,
                           const JKOOptions& opt = {}, JKOWarmStart* warm = nullptr) {
  const auto& grid = rho.grid();
  require_same_grid(grid, V.grid(), "jko_step");
  if (!(tau >= 0.0)) throw domain_error("jko_step: tau must be nonnegative");
  if (!rho.nonnegative() || !rho.all_finite()) throw domain_error("jko_step: rho must be a finite density");
  if (cap && rho.max() > 1.0 + kHeightTol) throw domain_error("jko_step: rho violates the height constraint");
  const double h2 = grid.cell_area();
  const double eps = opt.eps_cells * h2;
  const double L = std::log(h2);
  const double total = mass(rho);
  if (!(total > 0.0)) throw domain_error("jko_step: zero mass");

  JKOStep out;
  out.rho_in = rho;
  out.tau = tau;
  out.sinkhorn_eps = eps;
  if (tau == 0.0) {
    out.rho_out = rho;
    return out;
  }

  // Plan gamma_ij = alpha_i beta exp((f_i + g_j - C_ij)/eps), alpha = cell masses of rho, beta = h^2.
  const Box A = support_box(rho);
  JKOWarmStart local;
  JKOWarmStart& ws = warm ? *warm : local;
  int grow = 0;
  const bool same_source = ws.source.i0 == A.i0 && ws.source.j0 == A.j0 && ws.source.nx == A.nx &&
                           ws.source.ny == A.ny && ws.target.size() > 0;
  if (same_source) {
    grow = std::max(0, std::min(A.i0 - ws.target.i0, A.j0 - ws.target.j0));
  } else {
    const double reach = 2.0 * tau * detail::max_gradient(V, A.grown(2, grid)) + 8.0 * std::sqrt(eps);
    grow = 3 + static_cast<int>(std::ceil(reach / grid.h));
    ws.f.clear();
    ws.g.clear();
  }

  const auto a = restrict_to(rho, A);
  std::vector<double> la(a.size());
  double alog = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double ak = a[k] * h2;
    la[k] = ak > 0.0 ? std::log(ak) : kNegInf;
    if (ak > 0.0) alog += ak * la[k];
  }

  for (int attempt = 0;; ++attempt) {
    const Box B = A.grown(grow, grid, opt.margin_cells);
    if (!(B.i0 <= A.i0 && B.j0 <= A.j0 && B.i0 + B.nx >= A.i0 + A.nx && B.j0 + B.ny >= A.j0 + A.ny))
      throw solver_error("jko_step: support within " + std::to_string(opt.margin_cells) + " cells of the box edge");
    const auto v = restrict_to(V, B);
    const bool fresh = ws.f.size() != a.size() || ws.g.size() != B.size() ||
                       !(ws.target.i0 == B.i0 && ws.target.j0 == B.j0 && ws.target.nx == B.nx && ws.target.ny == B.ny);
    if (fresh) {
      ws.f.assign(a.size(), 0.0);
      ws.g.assign(B.size(), 0.0);
      for (std::size_t k = 0; k < B.size(); ++k) ws.g[k] = -2.0 * tau * v[k];
    }
    auto& f = ws.f;
    auto& g = ws.g;
    std::vector<double> w, q, r, nu(B.size());

    // KL-prox of 2 tau E around nu0 = exp(Q): returns g = e (log nu - Q).
    auto prox = [&](double e) {
      for (std::size_t k = 0; k < B.size(); ++k) {
        if (q[k] == kNegInf) {  // out of reach of the source at this eps
          g[k] = -2.0 * tau * v[k];
          continue;
        }
        const double Q = q[k] + L;
        double s = power_m > 0.0 ? detail::power_prox(Q, v[k], e, tau, power_m, L, opt.newton_tol)
                                 : Q - 2.0 * tau * v[k] / e;
        if (cap) s = std::min(s, L);
        g[k] = e * (s - Q);
      }
    };

    double e = fresh ? std::max(eps, opt.start_eps_cells * h2) : eps;
    out.iterations = 0;
    for (;;) {
      const bool last = e <= eps;
      const GibbsKernel k_ba(grid, B, A, e), k_ab(grid, A, B, e);
      const double tol = last ? opt.tol : opt.stage_tol;
      const double omega = last ? opt.relaxation : 1.0;
      for (int it = 0;; ++it) {
        // r_i = log sum_j beta exp((g_j - C_ij)/e): row sums are alpha_i exp(f_i/e + r_i)
        w.resize(B.size());
        for (std::size_t k = 0; k < B.size(); ++k) w[k] = g[k] / e + L;
        k_ba.apply(w, r);
        double viol = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k)
          if (a[k] > 0.0) viol += a[k] * std::fabs(std::exp(f[k] / e + r[k]) - 1.0);
        out.violation = viol * h2 / total;
        if (it > 0 && out.violation < tol) break;
        if (out.iterations >= opt.max_iterations)
          throw solver_error("jko_step: no convergence after " + std::to_string(out.iterations) +
                             " iterations, marginal violation " + std::to_string(out.violation));
        const double om = it > 0 ? omega : 1.0;
        for (std::size_t k = 0; k < a.size(); ++k) f[k] += om * (-e * r[k] - f[k]);
        w.resize(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) w[k] = la[k] + f[k] / e;
        k_ab.apply(w, q);
        prox(e);
        ++out.iterations;
      }
      if (last) break;
      e = std::max(eps, e * opt.scaling);
    }

    // Final f-projection makes the first marginal exact; nu is then the second marginal.
    {
      const GibbsKernel k_ba(grid, B, A, eps), k_ab(grid, A, B, eps);
      w.resize(B.size());
      for (std::size_t k = 0; k < B.size(); ++k) w[k] = g[k] / eps + L;
      k_ba.apply(w, r);
      for (std::size_t k = 0; k < a.size(); ++k) f[k] = -eps * r[k];
      w.resize(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) w[k] = la[k] + f[k] / eps;
      k_ab.apply(w, q);
      for (std::size_t k = 0; k < B.size(); ++k) nu[k] = q[k] == kNegInf ? 0.0 : std::exp(g[k] / eps + q[k] + L);

      w.resize(B.size());
      for (std::size_t k = 0; k < B.size(); ++k) w[k] = g[k] / eps + L;
      double cost = 0.0;
      for (auto wt : {GibbsKernel::Weight::dx2, GibbsKernel::Weight::dy2}) {
        k_ba.apply(w, r, wt);
        for (std::size_t k = 0; k < a.size(); ++k)
          if (a[k] > 0.0 && r[k] > kNegInf) cost += std::exp(la[k] + f[k] / eps + r[k]);
      }
      out.transport_cost = cost;
      double fa = 0.0, gn = 0.0, numass = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] > 0.0) fa += a[k] * h2 * f[k];
      for (std::size_t k = 0; k < B.size(); ++k)
        if (nu[k] > 0.0) gn += nu[k] * g[k], numass += nu[k];
      // sum gamma log gamma = (<f, alpha> + <g, nu> - <C, gamma>)/eps + sum alpha log alpha + |nu| log beta
      const double glogg = (fa + gn - cost) / eps + alog + numass * L;
      out.slack = eps * (alog - glogg) / (2.0 * tau);
    }

    // Mass near the target edge means the box was too small.
    double edge = 0.0;
    for (int j = 0; j < B.ny; ++j)
      for (int i = 0; i < B.nx; ++i)
        if (i < 2 || j < 2 || i >= B.nx - 2 || j >= B.ny - 2) edge += nu[std::size_t(j) * B.nx + i];
    if (edge > 1e-12 * total) {
      const Box wider = A.grown(2 * grow, grid, opt.margin_cells);
      if (wider.size() == B.size() || attempt >= 4)
        throw solver_error("jko_step: output mass reaches the target box edge (" + std::to_string(edge / total) +
                           " of the mass)");
      grow *= 2;
      ws.g.clear();
      continue;
    }
    // Gaussian tails of the plan would otherwise grow the support box every step.
    std::vector<double> dens(nu.size());
    for (std::size_t k = 0; k < nu.size(); ++k) dens[k] = nu[k] / h2 > kDensityFloor ? nu[k] / h2 : 0.0;
    out.rho_out = extend_from(grid, B, dens);
    ws.source = A;
    ws.target = B;
    return out;
  }
}

/// One JKO step of a frozen energy (frozen_potential or power_entropy_frozen).
inline JKOStep jko_step(const ScalarField& rho, double tau, const EnergySpec& spec, const JKOOptions& opt = {},
                        JKOWarmStart* warm = nullptr);

/// E_inf step as a fixed point of frozen steps: nu <- step(rho; potential N nu).
inline JKOStep fixed_point_step(const ScalarField& rho, double tau, const JKOOptions& opt = {},
                                double fixed_point_tol = 1e-6, int max_outer = 50) {
  if (rho.max() > 1.0 + kHeightTol) throw domain_error("fixed_point_step: rho violates the height constraint");
  const EnergySpec einf = EnergySpec::constrained();
  if (tau == 0.0) {
    JKOStep s;
    s.rho_in = s.rho_out = rho;
    s.energy_in = s.energy_out = s.objective = interaction_energy(rho);
    return s;
  }
  JKOWarmStart warm;
  ScalarField nu = rho;
  JKOOptions inner = opt;
  inner.tol = std::max(opt.tol, 1e-4);
  for (int k = 1; k <= max_outer; ++k) {
    JKOStep s = frozen_step(rho, tau, potential(nu), true, 0.0, inner, &warm);
    const double d = lp_distance(s.rho_out, nu, 1.0);
    nu = s.rho_out;
    if (d < fixed_point_tol && inner.tol <= opt.tol) {
      s.outer_iterations = k;
      s.fixed_point_residual = d;
      s.energy_in = energy(rho, einf);
      s.energy_out = energy(nu, einf);
      s.objective = s.transport_cost / (2.0 * tau) + s.energy_out;
      return s;
    }
    // inexact inner solves while the potential is still moving
    inner.tol = std::max(opt.tol, std::min(inner.tol, 1e-3 * d / mass(rho)));
  }
  throw solver_error("fixed_point_step: no fixed point after " + std::to_string(max_outer) + " outer iterations");
}

inline JKOStep jko_step(const ScalarField& rho, double tau, const EnergySpec& spec, const JKOOptions& opt,
                        JKOWarmStart* warm) {
  spec.validate();
  if (spec.kind == EnergyKind::constrained_interaction) return fixed_point_step(rho, tau, opt);
  const ScalarField V = frozen_potential(spec);
  const bool cap = spec.constrained_kind();
  JKOStep s = frozen_step(rho, tau, V, cap, cap ? 0.0 : *spec.m, opt, warm);
  s.energy_in = energy(rho, spec);
  s.energy_out = energy(s.rho_out, spec);
  s.objective = (tau > 0.0 ? s.transport_cost / (2.0 * tau) : 0.0) + s.energy_out;
  return s;
}

enum class FlowMode { constrained_interaction, frozen_potential, power_entropy_time_varying };

struct FlowSchedule {
  FlowMode mode = FlowMode::constrained_interaction;
  std::optional<ScalarField> frozen_mu;  // frozen_potential
  double m = 2.0;                        // power_entropy_time_varying
};

struct FlowTrajectory {
  std::vector<ScalarField> iterates;      // rho^0 .. rho^n of the requested flow
  std::vector<ScalarField> drivers;       // E_inf iterates mu^0 .. mu^(n-1) (time-varying mode)
  std::vector<JKOStep> steps;             // without rho_in/rho_out copies
};

/// n steps of size tau. In the time-varying mode step i uses E_m(.; mu^i) with mu^i
/// the i-th iterate of the E_inf flow from the same initial data.
inline FlowTrajectory run_flow(const ScalarField& rho0, double tau, int n, const FlowSchedule& sched,
                               const JKOOptions& opt = {},
                               const std::function<void(int, const ScalarField&, const JKOStep&)>& on_step = {}) {
  if (n < 0) throw domain_error("run_flow: n must be nonnegative");
  if (rho0.max() > 1.0 + kHeightTol) throw domain_error("run_flow: initial data violates the height constraint");
  FlowTrajectory traj;
  traj.iterates.push_back(rho0);
  ScalarField mu = rho0;
  JKOWarmStart warm;
  for (int i = 0; i < n; ++i) {
    const ScalarField& cur = traj.iterates.back();
    JKOStep s;
    switch (sched.mode) {
      case FlowMode::constrained_interaction: s = fixed_point_step(cur, tau, opt); break;
      case FlowMode::frozen_potential:
        if (!sched.frozen_mu) throw domain_error("run_flow: frozen_potential needs frozen_mu");
        s = jko_step(cur, tau, EnergySpec::frozen(*sched.frozen_mu), opt, &warm);
        break;
      case FlowMode::power_entropy_time_varying: {
        traj.drivers.push_back(mu);
        s = jko_step(cur, tau, EnergySpec::power(mu, sched.m), opt, &warm);
        if (i + 1 < n) mu = fixed_point_step(mu, tau, opt).rho_out;
        break;
      }
    }
    traj.iterates.push_back(s.rho_out);
    if (on_step) on_step(i + 1, traj.iterates.back(), s);
    s.rho_in = ScalarField();
    s.rho_out = ScalarField();
    traj.steps.push_back(std::move(s));
  }
  return traj;
}

}  // namespace cagg
