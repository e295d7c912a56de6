#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cvxint/divinv.hpp"

using namespace cvxint;

namespace {

GridSpec unit(int n, int nx, int nt = 1) {
  GridSpec g;
  g.box = BoxDomain::unit(n);
  g.nx = nx;
  g.nt = nt;
  g.T = 1;
  return g;
}

}  // namespace

TEST(DivInv, BumpNormalized) {
  auto b = BumpProfile::make({0, 2}, 401);
  EXPECT_DOUBLE_EQ(b.cumulative.back(), 1.0);
  double sup = *std::max_element(b.values.begin(), b.values.end());
  EXPECT_NEAR(sup * 2, BumpProfile::C0, 1e-3);
}

TEST(DivInv, OneDimensionalIsCumulativeIntegral) {
  auto g = unit(1, 129);
  ScalarField u(g);
  for (std::size_t s = 0; s < g.spatial_size(); ++s) u.values[s] = std::cos(M_PI * g.x(0, s));
  auto v = right_inverse_static(u);
  double acc = 0, h = g.h(0), err = 0;
  for (std::size_t s = 0; s < g.spatial_size(); ++s) {
    if (s) acc += 0.5 * h * (u.values[s] + u.values[s - 1]);
    err = std::max(err, std::fabs(v.at(0, s, 0) - acc));
  }
  EXPECT_LT(err, 1e-12);
  EXPECT_NEAR(v.at(0, 0, 0), 0, 1e-15);
  EXPECT_NEAR(v.at(0, g.spatial_size() - 1, 0), 0, 1e-12);
}

TEST(DivInv, DivergenceErrorFirstOrder) {
  for (int n : {1, 2})
    for (int w = 0; w < 3; ++w) {
      double e64 = 0, e128 = 0;
      for (int nx : {65, 129}) {
        auto g = unit(n, nx);
        auto u = smooth_test_input(g, w);
        double e = divergence_defect(right_inverse_static(u), u);
        EXPECT_LE(e, 5 * g.hmin()) << n << " " << w << " " << nx;
        (nx == 65 ? e64 : e128) = e;
      }
      EXPECT_GE(e64 / e128, 1.5);
      EXPECT_LE(e64 / e128, 2.5);
    }
}

TEST(DivInv, NormalTraceVanishesForMeanZero) {
  auto g = unit(2, 41);
  ScalarField u(g);
  for (std::size_t s = 0; s < g.spatial_size(); ++s) {
    Vec x = g.node(s);
    u.values[s] = std::cos(M_PI * x(0)) + std::sin(M_PI * x(1)) * std::cos(2 * M_PI * x(0)) +
                  x(0) - 0.5;
  }
  auto v = right_inverse_static(u);
  int idx[2];
  double worst = 0;
  for (std::size_t s = 0; s < g.spatial_size(); ++s) {
    g.unflat(s, idx);
    for (int a = 0; a < 2; ++a)
      if (idx[a] == 0 || idx[a] == g.nx - 1) worst = std::max(worst, std::fabs(v.at(0, s, a)));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(DivInv, ConstantBoundAndHistory) {
  auto c = measure_inverse_constant(BoxDomain::unit(2), 30, 11);
  ASSERT_EQ(c.history.size(), 30u);
  for (std::size_t i = 1; i < c.history.size(); ++i) EXPECT_GE(c.history[i], c.history[i - 1]);
  EXPECT_GT(c.constant, 0);
  EXPECT_LE(c.constant, BumpProfile::C0);
  // Fresh inputs respect the bound measured on 100 trials.
  auto c100 = measure_inverse_constant(BoxDomain::unit(2), 100, 11);
  auto g = unit(2, 65);
  std::mt19937_64 rng(99);
  for (int i = 0; i < 50; ++i) {
    auto u = random_smooth_input(g, rng());
    EXPECT_LE(right_inverse_static(u).max_norm(), c100.constant * 2 * u.max_abs() * (1 + 1e-12));
  }
}

TEST(DivInv, SpacetimeCommutesWithTimeDerivative) {
  auto g = unit(2, 33, 9);
  ScalarField u(g);
  auto a = smooth_test_input(g, 0), b = smooth_test_input(g, 1);
  for (int k = 0; k < g.nt; ++k)
    for (std::size_t s = 0; s < g.spatial_size(); ++s)
      u.at(k, s) = std::sin(g.t(k)) * a.values[s] + g.t(k) * g.t(k) * b.values[s];
  auto R = right_inverse_spacetime(u);
  ScalarField ut(g);
  for (int k = 0; k < g.nt; ++k)
    for (std::size_t s = 0; s < g.spatial_size(); ++s) ut.at(k, s) = u.time_derivative(k, s);
  auto Rt = right_inverse_spacetime(ut);
  double worst = 0;
  for (int k = 0; k < g.nt; ++k)
    for (std::size_t s = 0; s < g.spatial_size(); ++s)
      worst = std::max(worst, (R.v.time_derivative(k, s) - Rt.v.get(k, s)).norm());
  EXPECT_LT(worst, 1e-12);
  EXPECT_TRUE(R.mean_warning);
}
