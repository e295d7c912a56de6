#include <gtest/gtest.h>

#include <cmath>

#include "cvxint/parabolic.hpp"

using namespace cvxint;

namespace {

GridSpec unit(int n, int nx, int nt, double T) {
  GridSpec g;
  g.box = BoxDomain::unit(n);
  g.nx = nx;
  g.nt = nt;
  g.T = T;
  return g;
}

ScalarField cosine(const GridSpec& g, double amp) {
  return sample_initial_datum({{"name", "cosine"}, {"amplitude", amp}}, slice_grid(g));
}

}  // namespace

TEST(Parabolic, StableStep) {
  auto g = unit(2, 65, 3, 1);
  EXPECT_DOUBLE_EQ(stable_dt(g, 1.0), g.h(0) * g.h(0) / 4);
}

TEST(Parabolic, PoissonEigenfunctions) {
  auto g = unit(1, 129, 1, 1);
  ScalarField f(g);
  for (std::size_t s = 0; s < g.spatial_size(); ++s) f.values[s] = std::cos(M_PI * g.x(0, s));
  auto r = solve_neumann_poisson(f);
  double e = 0;
  for (std::size_t s = 0; s < g.spatial_size(); ++s)
    e = std::max(e, std::fabs(r.h.values[s] + std::cos(M_PI * g.x(0, s)) / (M_PI * M_PI)));
  EXPECT_LT(e, 1e-6);

  auto g2 = unit(2, 65, 1, 1);
  ScalarField f2(g2);
  for (std::size_t s = 0; s < g2.spatial_size(); ++s) {
    Vec x = g2.node(s);
    f2.values[s] = std::cos(M_PI * x(0)) * std::cos(2 * M_PI * x(1));
  }
  auto r2 = solve_neumann_poisson(f2);
  e = 0;
  for (std::size_t s = 0; s < g2.spatial_size(); ++s)
    e = std::max(e, std::fabs(r2.h.values[s] + f2.values[s] / (5 * M_PI * M_PI)));
  EXPECT_LT(e, 1e-6);
}

TEST(Parabolic, PoissonRejectsMean) {
  auto g = unit(1, 33, 1, 1);
  ScalarField f(g);
  for (auto& v : f.values) v = 1;
  EXPECT_THROW(solve_neumann_poisson(f), PreconditionError);
}

TEST(Parabolic, SmallDataFollowsHeatEquation) {
  // Below m_minus the flux is sigma(p) = p + O(p^3): amplitude 1e-3 decays
  // like the heat mode exp(-pi^2 t) to relative accuracy 1e-5.
  auto prof = build_profile(2.0, 0.5, 1);
  auto g = unit(1, 129, 11, 0.1);
  std::vector<StepDiagnostics> diag;
  auto u = solve_regularized(cosine(g, 1e-3), prof, g, &diag);
  double e = 0;
  for (std::size_t s = 0; s < g.spatial_size(); ++s)
    e = std::max(e, std::fabs(u.at(g.nt - 1, s) -
                              1e-3 * std::exp(-M_PI * M_PI * g.T) * std::cos(M_PI * g.x(0, s))));
  EXPECT_LT(e, 1e-3 * 1e-4);
  EXPECT_EQ(diag.size(), static_cast<std::size_t>(g.nt));
}

TEST(Parabolic, MassAndMaxPrinciple) {
  for (int n : {1, 2}) {
    auto prof = build_profile(2.0, 0.5, n);
    auto g = unit(n, n == 1 ? 129 : 33, 9, 0.1);
    std::vector<StepDiagnostics> diag;
    auto u = solve_regularized(cosine(g, 2 / M_PI), prof, g, &diag);
    for (const auto& d : diag) EXPECT_NEAR(d.mass, diag.front().mass, 1e-12);
    auto mp = check_gradient_max_principle(u);
    EXPECT_TRUE(mp.passed) << mp.ratio;
    EXPECT_LE(mp.ratio, 1 + 10 * mp.h);
  }
}

TEST(Parabolic, UnstableSubstepsRejected) {
  auto prof = build_profile(2.0, 0.5, 1);
  auto g = unit(1, 129, 3, 0.1);
  SolveOptions opt;
  opt.substeps = 1;
  EXPECT_THROW(solve_regularized(cosine(g, 0.5), prof, g, nullptr, opt), NumericalError);
}

TEST(Parabolic, GradientStencil) {
  auto g = unit(1, 129, 1, 1);
  auto u = cosine(g, 1.0);
  double e = 0;
  for (std::size_t s = 0; s < g.spatial_size(); ++s)
    e = std::max(e, std::fabs(neumann_gradient4(g, u.values.data(), s)(0) +
                              M_PI * std::sin(M_PI * g.x(0, s))));
  EXPECT_LT(e, 1e-6);
}

TEST(Parabolic, BoundaryDatumProperties) {
  auto prof = build_profile(2.0, 0.5, 1);
  auto g = unit(1, 129, 129, 0.25);
  auto d = build_boundary_datum(cosine(g, 2 / M_PI), prof, g);
  EXPECT_NEAR(d.M, 2.0, 1e-3);
  EXPECT_LT(d.normal_trace, 1e-12);
  EXPECT_LT(d.div_defect, 0.01);
  EXPECT_LE(d.violating_fraction, 0.01);
  double ut = 0;
  for (int k = 0; k < g.nt; ++k)
    for (std::size_t s = 0; s < g.spatial_size(); ++s) ut = std::max(ut, std::fabs(d.u_star.time_derivative(k, s)));
  EXPECT_GT(d.mu, ut);
  EXPECT_GT(d.s_delta_nodes, 0);
  EXPECT_GT(d.k_delta_nodes, 0);
}

TEST(Parabolic, DivergenceDefectShrinksUnderRefinement) {
  auto prof = build_profile(0.9, 0.5, 1);
  double prev = 1e300;
  for (int nx : {33, 65, 129}) {
    auto g = unit(1, nx, nx, 0.1);
    auto d = build_boundary_datum(cosine(g, 0.2), prof, g);
    EXPECT_LT(d.div_defect, prev);
    prev = d.div_defect;
  }
}

TEST(Parabolic, Membership) {
  auto prof = build_profile(2.0, 0.5, 1);
  Vec p = vec({0.2});
  EXPECT_EQ(classify_membership(p, vec({0.2 / 1.04}), prof.delta, prof.m_minus), Membership::k_delta);
  EXPECT_EQ(classify_membership(vec({1.0}), vec({0.4}), prof.delta, prof.m_minus), Membership::s_delta);
  EXPECT_EQ(classify_membership(vec({1.0}), vec({0.1}), prof.delta, prof.m_minus), Membership::none);
}

TEST(Parabolic, Catalog) {
  auto g = unit(2, 17, 1, 1);
  auto u = sample_initial_datum({{"name", "gaussian"}, {"amplitude", 2.0}, {"width", 0.1}}, g);
  EXPECT_NEAR(u.max_abs(), 2.0, 1e-12);
  EXPECT_THROW(sample_initial_datum({{"name", "nope"}}, g), PreconditionError);
  auto z = sample_initial_datum({{"name", "zero"}}, g);
  EXPECT_EQ(z.max_abs(), 0);
  EXPECT_EQ(diagnostics_csv({}).rfind("t,mass", 0), 0u);
}
