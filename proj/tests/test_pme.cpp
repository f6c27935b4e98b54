#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cagg/newtonian.hpp"
#include "cagg/pme.hpp"

using namespace cagg;

namespace {

ScalarField disk(const GridSpec& g, Point c, double r) {
  return ScalarField::sample(g, [&](double x, double y) { return std::hypot(x - c[0], y - c[1]) < r ? 1.0 : 0.0; });
}

double barenblatt_error(double h) {
  const auto g = GridSpec::box(-2.0, 2.0, h);
  const Barenblatt b{2.0, 0.25, 2.0};
  PMEConfig cfg;
  cfg.m = 2.0;
  cfg.t_end = 0.1;
  const auto out = run(b.cell_average(g, 0.1), cfg, zero_drift(g));
  return lp_distance(out.final_density, b.cell_average(g, 0.2), 1.0);
}

}  // namespace

TEST(Barenblatt, SolvesPorousMedium) {
  // rho_t = Laplace rho^m by finite differences of the closed form, inside the support
  for (double m : {2.0, 3.0}) {
    const Barenblatt b{m, 0.3, 2.0};
    const double t = 0.5, e = 1e-4;
    for (double r : {0.0, 0.3, 0.6}) {
      if (r > 0.8 * b.support_radius(t)) continue;
      const double x = r, y = 0.1;
      const double rt = (b(x, y, t + e) - b(x, y, t - e)) / (2 * e);
      auto pm = [&](double a, double c) { return std::pow(b(a, c, t), m); };
      const double lap = (pm(x + e, y) + pm(x - e, y) + pm(x, y + e) + pm(x, y - e) - 4 * pm(x, y)) / (e * e);
      EXPECT_NEAR(rt, lap, 1e-4 * std::max(1.0, std::fabs(rt))) << m << " " << r;
    }
  }
  // mass is conserved in time: pi c0^2 / (2k) for m = 2
  const Barenblatt b{2.0, 0.25, 2.0};
  EXPECT_DOUBLE_EQ(b.k(), 1.0 / 16.0);
  const auto g = GridSpec::box(-2.0, 2.0, 1.0 / 32.0);
  for (double t : {0.1, 0.2}) EXPECT_NEAR(mass(b.cell_average(g, t)), kPi * 0.0625 / (2 * b.k()), 1e-4);
}

TEST(Step, BarenblattRefinement) {
  const double e1 = barenblatt_error(1.0 / 16.0);
  const double e2 = barenblatt_error(1.0 / 32.0);
  EXPECT_LT(e2, e1);
  EXPECT_GE(e1 / e2, 1.7) << e1 << " " << e2;
}

TEST(Step, ConservesMassAndZero) {
  const auto g = GridSpec::box(-2.0, 2.0, 1.0 / 32.0);
  const auto rho0 = disk(g, {0.2, 0.0}, 0.8);
  PMEConfig cfg;
  cfg.m = 3.0;
  const auto phi = potential(rho0);
  auto rho = rho0;
  for (int k = 0; k < 200; ++k) {
    const double before = mass(rho);
    rho = step(rho, cfg, phi);
    EXPECT_NEAR(mass(rho), before, 1e-12 * before);
    EXPECT_TRUE(rho.nonnegative());
  }
  const auto zero = step(ScalarField(g), cfg, phi);
  EXPECT_EQ(zero.max(), 0.0);
}

TEST(Step, RejectsOversizedStep) {
  const auto g = GridSpec::box(-1.0, 1.0, 1.0 / 16.0);
  const auto rho = disk(g, {0, 0}, 0.5);
  PMEConfig cfg;
  const auto phi = ScalarField(g);
  const double dt = stable_dt(rho, cfg, phi);
  EXPECT_THROW(step(rho, cfg, phi, 10 * dt / cfg.dt_safety), cagg::solver_error);
  EXPECT_THROW(step(rho, cfg, phi, -1.0), cagg::domain_error);
  PMEConfig bad;
  bad.m = 1.0;
  EXPECT_THROW(bad.validate(), cagg::domain_error);
  bad = {};
  bad.dt_safety = 0.0;
  EXPECT_THROW(bad.validate(), cagg::domain_error);
}

TEST(Step, ConstantSourceGrowsMass) {
  const auto g = GridSpec::box(-2.0, 2.0, 1.0 / 32.0);
  PMEConfig cfg;
  cfg.m = 2.0;
  cfg.source = [](double, double, double) { return 1.0; };
  auto rho = disk(g, {0, 0}, 0.7);
  const auto phi = ScalarField(g);
  for (int k = 0; k < 50; ++k) {
    const double dt = stable_dt(rho, cfg, phi);
    const double before = mass(rho);
    rho = step(rho, cfg, phi, dt);
    EXPECT_NEAR((mass(rho) - before) / dt, before, 1e-6 * before);
  }
}

TEST(Pressure, DefinitionAndRoundTrip) {
  const auto g = GridSpec::box(-1.0, 1.0, 0.25);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  const auto rho = ScalarField::sample(g, [&](double x, double) { return x < 0 ? 0.0 : u(rng); });
  for (double m : {2.0, 8.0, 50.0}) {
    const auto pv = pressure(rho, m);
    const auto back = density_from_pressure(pv.p, m);
    for (std::size_t k = 0; k < g.size(); ++k) {
      EXPECT_NEAR(back[k], rho[k], 1e-12 * std::max(1.0, rho[k]));
      EXPECT_EQ(pv.p[k] > 0.0, rho[k] > 0.0);
    }
    const auto one = pressure(ScalarField::sample(g, [](double, double) { return 1.0; }), m);
    EXPECT_NEAR(one.p.max(), m / (m - 1.0), 1e-15);
  }
  EXPECT_EQ(pressure(ScalarField(g), 3.0).p.max(), 0.0);
  EXPECT_THROW(pressure(rho, 1.0), cagg::domain_error);
}

TEST(Pressure, InitialDataNormalizations) {
  const auto g = GridSpec::box(-1.0, 1.0, 0.25);
  const auto p0 = ScalarField::sample(g, [](double x, double) { return std::max(0.0, 0.5 - x * x); });
  const double m = 4.0;
  const auto lemma = initial_density(p0, m, PressureInitialData::lemma);
  const auto consistent = initial_density(p0, m, PressureInitialData::consistent);
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(lemma[k], std::pow(m / (m - 1.0) * p0[k], 1.0 / (m - 1.0)), 1e-14);
    EXPECT_NEAR(consistent[k], std::pow((m - 1.0) / m * p0[k], 1.0 / (m - 1.0)), 1e-14);
  }
}

TEST(Contraction, IdenticalAndNestedDisks) {
  const auto g = GridSpec::box(-2.0, 2.0, 1.0 / 16.0);
  PMEConfig cfg;
  cfg.m = 10.0;
  const auto a = disk(g, {0, 0}, 1.0), b = disk(g, {0, 0}, 1.1);
  const auto same = l1_contraction_test(a, a, cfg, ScalarField(g), 0.5);
  EXPECT_EQ(same.final, 0.0);
  for (const auto& phi : {ScalarField(g), potential(a)}) {
    const auto rep = l1_contraction_test(a, b, cfg, phi, 0.5);
    EXPECT_TRUE(rep.ok);
    EXPECT_LE(rep.max_ratio, 1.02);
    EXPECT_GT(rep.initial, 0.0);
  }
}

TEST(Contraction, SourceGrowthBound) {
  const auto g = GridSpec::box(-2.0, 2.0, 1.0 / 16.0);
  PMEConfig c1, c2;
  c1.m = c2.m = 4.0;
  c2.source = [](double, double, double) { return 1.0; };
  const auto phi = ScalarField(g);
  auto r1 = disk(g, {0, 0}, 0.8), r2 = disk(g, {0.1, 0}, 0.8);
  const double d0 = lp_distance(r1, r2, 1.0);
  double t = 0.0, forcing = 0.0;
  while (t < 0.2) {
    const double dt = std::min({stable_dt(r1, c1, phi), stable_dt(r2, c2, phi), 0.2 - t});
    forcing += mass(r2) * dt;
    r1 = step(r1, c1, phi, dt, t);
    r2 = step(r2, c2, phi, dt, t);
    t += dt;
    EXPECT_LE(lp_distance(r1, r2, 1.0), (d0 + forcing) * 1.02);
  }
}

TEST(Comparison, OrderingPersists) {
  const auto g = GridSpec::box(-2.0, 2.0, 1.0 / 16.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PMEConfig cfg;
  cfg.m = 3.0;
  for (int trial = 0; trial < 5; ++trial) {
    auto lo = ScalarField::sample(g, [&](double x, double y) { return std::hypot(x, y) < 1.0 ? u(rng) : 0.0; });
    auto hi = lo;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (std::hypot(g.x(static_cast<int>(k) % g.nx), g.y(static_cast<int>(k) / g.nx)) < 1.2) hi[k] += 0.5 * u(rng);
    const auto phi = potential(hi);
    for (int s = 0; s < 40; ++s) {
      const double dt = std::min(stable_dt(lo, cfg, phi), stable_dt(hi, cfg, phi));
      lo = step(lo, cfg, phi, dt);
      hi = step(hi, cfg, phi, dt);
    }
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_LE(lo[k], hi[k] + 1e-13);
  }
}

TEST(Run, SelfConsistentKeepsCenterAndHeight) {
  const double h = 1.0 / 16.0;
  const auto g = GridSpec::box(-2.5, 2.5, h);
  const double m = 16.0;
  PMEConfig cfg;
  cfg.m = m;
  cfg.t_end = 0.3;
  cfg.drift_mode = DriftMode::self_consistent;
  const auto rho0 = disk(g, {0.25, -0.125}, 1.0);
  const auto c0 = center_of_mass(rho0);
  const double r0 = barrier_initial_radius(support_radius(rho0, {0.25, -0.125}), pressure(rho0, m).p.max());
  double max_height_late = 0.0, max_excess = 0.0;
  run(rho0, cfg, self_consistent_drift(), [&](const PMESolver& s) {
    const auto& rho = s.density();
    const auto c = center_of_mass(rho);
    EXPECT_NEAR(c[0], c0[0], h * (1 + s.time()));
    EXPECT_NEAR(c[1], c0[1], h * (1 + s.time()));
    EXPECT_LE(support_radius(rho, {0.25, -0.125}), support_barrier(s.time(), r0) + std::sqrt(2.0) * h);
    EXPECT_NEAR(mass(rho), mass(rho0), 1e-11 * mass(rho0));
    if (s.time() > 0.15) max_height_late = std::max(max_height_late, rho.max());
    max_excess = std::max(max_excess, excess_mass(rho));
  });
  EXPECT_LE(max_height_late, height_bound(m));
  EXPECT_LE(max_excess, 2 * excess_mass_bound(m));
}

TEST(Barrier, Formulas) {
  const ModulusParams p;
  EXPECT_DOUBLE_EQ(support_barrier(0.0, 1.7), 1.7);
  EXPECT_NEAR(support_barrier(2.0, 1.0), (1.0 + p.c_d / 2) * std::exp(1.0) - p.c_d / 2, 1e-14);
  // R0 >= 1, supp p0 in B_{R0/2}, p0 <= R0^2 / (4d)
  for (double r : {0.3, 1.0, 2.0})
    for (double pmax : {0.0, 0.5, 3.0}) {
      const double R0 = barrier_initial_radius(r, pmax);
      EXPECT_GE(R0, 1.0);
      EXPECT_GE(R0 / 2, r);
      EXPECT_LE(pmax, R0 * R0 / 8.0 + 1e-14);
    }
  EXPECT_DOUBLE_EQ(height_bound(6.0), 2.0);
  EXPECT_NEAR(excess_mass_bound(16.0), std::sqrt((2 + p.c_d * p.c_d) / 16.0), 1e-15);
}

TEST(Drift, FrozenSequenceIsPiecewiseConstant) {
  const auto g = GridSpec::box(-1.0, 1.0, 0.5);
  auto f = [&](double v) { return ScalarField::sample(g, [v](double, double) { return v; }); };
  const auto d = frozen_sequence_drift({0.0, 1.0, 2.0}, {f(10), f(20), f(30)});
  const ScalarField rho(g);
  EXPECT_EQ(d(0.0, rho)->max(), 10);
  EXPECT_EQ(d(0.99, rho)->max(), 10);
  EXPECT_EQ(d(1.0, rho)->max(), 20);
  EXPECT_EQ(d(5.0, rho)->max(), 30);
  EXPECT_THROW(frozen_sequence_drift({1.0, 0.0}, {f(1), f(2)}), cagg::domain_error);
}
