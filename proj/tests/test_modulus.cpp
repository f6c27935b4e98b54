#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cagg/modulus.hpp"

using namespace cagg;

namespace {

const double kB = std::exp(-1.0 - std::sqrt(2.0));
const double kA = 2.0 * (1.0 + std::sqrt(2.0)) * kB;

// Exact flow of y' = -c sqrt(y^2 + a y) while y stays above the branch point:
// sqrt(y) + sqrt(y + a) decays like e^(-c t / 2).
double upper_branch_flow(double x, double t, double c) {
  const double q = (std::sqrt(x) + std::sqrt(x + kA)) * std::exp(-0.5 * c * t);
  const double u = (q * q - kA) / (2.0 * q);
  return u * u;
}

}  // namespace

TEST(Omega, ValuesAndBranch) {
  EXPECT_EQ(omega(0.0), 0.0);
  EXPECT_NEAR(omega(kB), (1.0 + std::sqrt(2.0)) * kB, 1e-15);
  EXPECT_NEAR(omega(kB), 0.215922, 5e-6);
  EXPECT_NEAR(omega(1.0), std::sqrt(1.0 + kA), 1e-15);
  EXPECT_NEAR(kB * std::fabs(std::log(kB)), std::sqrt(kB * kB + kA * kB), 1e-15);
  EXPECT_NEAR(omega(kB * (1 - 1e-13)), omega(kB * (1 + 1e-13)), 1e-12);
  EXPECT_THROW(omega(-1e-3), cagg::domain_error);
}

TEST(Sigma, ValuesAndBranch) {
  const double bs = std::exp((-1.0 - std::sqrt(2.0)) / 2.0);
  EXPECT_NEAR(ModulusParams::branch_sigma() * ModulusParams::branch_sigma(), ModulusParams::branch_omega(), 1e-16);
  EXPECT_EQ(sigma(0.0), 0.0);
  EXPECT_NEAR(sigma(0.1), 0.2 * std::log(10.0), 1e-15);
  EXPECT_NEAR(sigma(bs), (1.0 + std::sqrt(2.0)) * bs, 1e-15);
  EXPECT_NEAR(sigma(bs), 0.721998, 5e-6);
  EXPECT_NEAR(sigma(bs * (1 - 1e-13)), sigma(bs * (1 + 1e-13)), 1e-12);
  EXPECT_THROW(sigma(-1.0), cagg::domain_error);
}

TEST(Moduli, NondecreasingAndPositive) {
  double po = 0, ps = 0;
  for (int k = 1; k <= 4000; ++k) {
    const double x = k * 1e-3;
    EXPECT_GT(omega(x), 0.0);
    EXPECT_GE(omega(x), po);
    EXPECT_GE(sigma(x), ps);
    po = omega(x), ps = sigma(x);
  }
}

TEST(FTau, Definition) {
  ModulusParams p{1.0};
  EXPECT_EQ(f_tau(0.0, 0.1, p), 0.0);
  EXPECT_EQ(f_tau(-3.0, 0.1, p), 0.0);
  // e^-3 lies below the branch point, e^-2 above it
  const double x = std::exp(-3.0);
  EXPECT_NEAR(f_tau(x, 0.1, p), x - 0.1 * 3.0 * x, 1e-16);
  const double y = std::exp(-2.0);
  EXPECT_NEAR(f_tau(y, 0.1, p), y - 0.1 * std::sqrt(y * y + kA * y), 1e-16);
  EXPECT_THROW(f_tau(0.1, 0.0, p), cagg::domain_error);
  EXPECT_EQ(f_tau_n(0.3, 0.1, 0, p), 0.3);
}

TEST(FTau, SubadditiveShift) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  ModulusParams p;
  for (int k = 0; k < 2000; ++k) {
    const double x = u(rng), y = u(rng), tau = 0.05 * u(rng) + 1e-3;
    EXPECT_LE(f_tau(x + y, tau, p), f_tau(x, tau, p) + y + 1e-14);
  }
}

TEST(FlowF, ClosedFormAndIdentity) {
  ModulusParams p{1.0};
  EXPECT_EQ(flow_F(0.37, 0.0, p), 0.37);
  EXPECT_NEAR(flow_F(0.01, std::log(2.0), p), 1e-4, 1e-16);
  EXPECT_THROW(flow_F(-0.1, 1.0, p), cagg::domain_error);
}

TEST(FlowF, UpperBranchMatchesQuadrature) {
  for (double c : {1.0, 1.0 + 1.0 / (2.0 * std::numbers::pi)}) {
    ModulusParams p{c};
    for (double x : {0.5, 1.0, 3.0}) {
      // stay above the branch point
      const double t = 0.2;
      const double y = upper_branch_flow(x, t, c);
      ASSERT_GT(y, kB);
      EXPECT_NEAR(flow_F(x, t, p), y, 1e-11 * x);
    }
  }
}

TEST(FlowF, OdeResidual) {
  ModulusParams p;
  const double dt = 1e-4;
  for (double x : {0.01, 0.05, 0.1}) {
    for (double t : {0.1, 0.5, 1.0}) {
      const double d = (flow_F(x, t + dt, p) - flow_F(x, t - dt, p)) / (2 * dt);
      const double rhs = -p.c_d * omega(flow_F(x, t, p));
      EXPECT_LT(std::fabs(d - rhs) / std::fabs(rhs), 1e-6) << x << " " << t;
    }
  }
}

TEST(FlowF, MonotoneInXAndT) {
  ModulusParams p;
  for (double t : {0.0, 0.3, 1.0}) {
    double prev = 0.0;
    for (int k = 1; k <= 200; ++k) {
      const double v = flow_F(k * 0.01, t, p);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
  for (double x : {0.05, 0.5, 1.5}) {
    double prev = x;
    for (int k = 1; k <= 50; ++k) {
      const double v = flow_F(x, 0.05 * k, p);
      EXPECT_LE(v, prev + 1e-15);
      prev = v;
    }
  }
}

TEST(FlowF, EulerErrorBound) {
  ModulusParams p{1.0};
  const double x = 0.05, t = 1.0;
  const double exact = flow_F(x, t, p);
  double prev_err = std::numeric_limits<double>::infinity();
  for (int n : {10, 100, 1000}) {
    const double err = std::fabs(exact - f_tau_n(x, t / n, n, p));
    EXPECT_LE(err, p.c_d * omega(x) * t / n) << n;
    EXPECT_LT(err, prev_err);
    prev_err = err;
  }
}

TEST(Params, Validate) {
  EXPECT_NO_THROW(ModulusParams{}.validate());
  EXPECT_THROW(ModulusParams{0.5}.validate(), cagg::domain_error);
  EXPECT_DOUBLE_EQ(ModulusParams{}.lambda_omega(), -ModulusParams{}.c_d);
}
