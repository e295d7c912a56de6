#include <gtest/gtest.h>

#include <cmath>

#include "cvxint/flux.hpp"

using namespace cvxint;

namespace {

// Root of rho(m) = d on [lo, hi] by plain bisection, independent of m_bounds.
double bisect_rho(double d, double lo, double hi) {
  const bool inc = rho(lo) < rho(hi);
  for (int i = 0; i < 200; ++i) {
    double m = 0.5 * (lo + hi);
    if ((rho(m) < d) == inc)
      lo = m;
    else
      hi = m;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Flux, RhoShape) {
  EXPECT_DOUBLE_EQ(rho(1.0), 0.5);
  EXPECT_NEAR(rho_prime(1.0), 0.0, 1e-15);
  for (double s : {0.1, 0.7, 1.3, 4.0}) {
    const double h = 1e-6;
    EXPECT_NEAR(rho_prime(s), (rho(s + h) - rho(s - h)) / (2 * h), 1e-8);
    EXPECT_NEAR(rho_second(s), (rho_prime(s + h) - rho_prime(s - h)) / (2 * h), 1e-7);
  }
}

TEST(Flux, MBoundsMatchBisection) {
  for (double d : {0.05, 0.2, 0.3, 2.5 / 7.25, 0.49}) {
    auto mb = m_bounds(d);
    EXPECT_NEAR(mb.m_minus, bisect_rho(d, 0, 1), 1e-12);
    EXPECT_NEAR(mb.m_plus, bisect_rho(d, 1, 1e3), 1e-9);
    EXPECT_NEAR(mb.m_minus * mb.m_plus, 1.0, 1e-12);
  }
  EXPECT_THROW(m_bounds(0.5), std::domain_error);
  EXPECT_THROW(m_bounds(0.0), std::domain_error);
}

TEST(Flux, SelectionRuleAcceptanceValues) {
  auto prof = build_profile(2.0, 0.5, 1);
  EXPECT_NEAR(prof.delta, 2.5 / 7.25, 1e-14);
  EXPECT_NEAR(prof.m_minus, 0.4, 1e-12);
  EXPECT_NEAR(prof.m_plus, 2.5, 1e-12);
  EXPECT_NEAR(prof.Lambda, 2.25, 1e-14);
  const double theta = (rho(2.25) - prof.delta) / (4 * (2.25 - 0.4));
  EXPECT_NEAR(prof.theta, theta, 1e-14);
  EXPECT_NEAR(prof.theta, 0.00355492, 1e-8);
  EXPECT_DOUBLE_EQ(selected_delta(2.0, 0.5), prof.delta);
  EXPECT_NEAR(selected_delta(0.5, 0.5), 0.9 * 0.5 / 1.25, 1e-15);
}

TEST(Flux, ProfileValidates) {
  for (double M : {0.5, 0.9, 1.0, 2.0, 4.0}) {
    auto prof = build_profile(M, 0.5, 1);
    auto chk = validate_profile(prof);
    EXPECT_TRUE(chk.ok) << "M=" << M << ": " << chk.failure;
    EXPECT_GT(chk.min_slope, 0);
    EXPECT_LE(chk.max_undercut_violation, 0);
    EXPECT_LT(chk.max_identity_gap, 1e-12);
  }
  EXPECT_THROW(build_profile(-1, 0.5), PreconditionError);
  EXPECT_THROW(build_profile(2, 0.0), PreconditionError);
}

TEST(Flux, DerivativesMatchDifferences) {
  auto prof = build_profile(2.0, 0.5, 1);
  const double lo = prof.m_minus, w = prof.blend_width;
  for (double s : {0.2, lo + 0.1 * w, lo + 0.5 * w, lo + 0.93 * w, 1.7, 3.0}) {
    const double h = 1e-6;
    EXPECT_NEAR(prof.rho_star_prime(s), (prof.rho_star(s + h) - prof.rho_star(s - h)) / (2 * h), 1e-6)
        << s;
    EXPECT_NEAR(prof.rho_star_second(s),
                (prof.rho_star_prime(s + h) - prof.rho_star_prime(s - h)) / (2 * h), 1e-4)
        << s;
  }
  EXPECT_DOUBLE_EQ(prof.rho_star(0.3), rho(0.3));
  EXPECT_NEAR(prof.rho_star_prime(3.0), prof.theta, 1e-14);
}

TEST(Flux, FluxAndJacobian) {
  auto prof = build_profile(2.0, 0.5, 2);
  for (Vec p : {vec({0.1, -0.2}), vec({0.35, 0.2}), vec({1.0, 1.2}), vec({-2.0, 0.3})}) {
    Vec A = A_flux(prof, p);
    double r = p.norm();
    EXPECT_NEAR((A - prof.rho_star(r) / r * p).norm(), 0, 1e-14);
    Mat J = A_jacobian(prof, p);
    for (int c = 0; c < 2; ++c) {
      Vec e = Vec::Zero(2);
      e(c) = 1e-6;
      Vec col = (A_flux(prof, p + e) - A_flux(prof, p - e)) / 2e-6;
      EXPECT_NEAR((J.col(c) - col).norm(), 0, 1e-6);
    }
  }
  Mat S = sigma_jacobian(vec({0.4, -0.3}));
  Vec d = (sigma(vec({0.4 + 1e-6, -0.3})) - sigma(vec({0.4 - 1e-6, -0.3}))) / 2e-6;
  EXPECT_NEAR((S.col(0) - d).norm(), 0, 1e-8);
  EXPECT_TRUE(A_flux(prof, vec({0.0, 0.0})).isZero());
}

TEST(Flux, JsonRoundTrip) {
  auto prof = build_profile(2.0, 0.5, 1);
  auto back = FluxProfile::from_json(prof.to_json());
  for (double s : {0.1, 0.45, 0.5, 1.0, 2.4})
    EXPECT_DOUBLE_EQ(back.rho_star(s), prof.rho_star(s));
}

TEST(Flux, Smoothstep) {
  EXPECT_DOUBLE_EQ(smoothstep7(0), 0);
  EXPECT_DOUBLE_EQ(smoothstep7(1), 1);
  EXPECT_NEAR(smoothstep7(0.5), 0.5, 1e-15);
  EXPECT_NEAR(smoothstep7_prime(0.3), (smoothstep7(0.3 + 1e-6) - smoothstep7(0.3 - 1e-6)) / 2e-6, 1e-8);
}
