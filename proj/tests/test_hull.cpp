#include <gtest/gtest.h>

#include <cmath>

#include "cvxint/flux.hpp"
#include "cvxint/hull.hpp"

using namespace cvxint;

TEST(Hull, WorkedCaseOne) {
  ReducedPoint z{vec({1, 0}), vec({0.3, 0})};
  auto f = rank_one_decompose(z);
  EXPECT_NEAR(f.t_plus, 2.0, 1e-10);
  EXPECT_NEAR(f.t_minus, -2.0 / 3, 1e-10);
  EXPECT_NEAR((f.q - vec({1, 0})).norm(), 0, 1e-10);
  EXPECT_NEAR(f.gamma.norm(), 0, 1e-10);
  for (double t : {f.t_minus, f.t_plus})
    EXPECT_NEAR((sigma(z.p + t * f.q) - z.beta).norm(), 0, 1e-12);
}

TEST(Hull, CaseTwoHasTransverseGamma) {
  ReducedPoint z{vec({1, 0.5}), vec({0.3, 0})};
  auto f = rank_one_decompose(z);
  EXPECT_GT(f.gamma.norm(), 1e-3);
  EXPECT_NEAR(f.q.norm(), 1, 1e-12);
  EXPECT_NEAR(f.gamma.dot(f.q), 0, 1e-12);
  EXPECT_LT(f.t_minus, 0);
  EXPECT_GT(f.t_plus, 0);
  // Independent evaluation of sigma at both endpoints.
  for (double t : {f.t_minus, f.t_plus}) {
    Vec p = z.p + t * f.q;
    Vec s = p / (1 + p.squaredNorm());
    EXPECT_NEAR((s - z.beta - t * f.gamma).norm(), 0, 1e-9);
  }
  EXPECT_LT(frame_residual(f, z), 1e-9);
  Mat E = f.eta();
  EXPECT_EQ(E.rows(), 3);
  // eta is rank one.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(E);
  EXPECT_LT(svd.singularValues()(1), 1e-10 * svd.singularValues()(0));
}

TEST(Hull, OutsideRejected) {
  ReducedPoint z{vec({1, 0}), vec({0.8, 0})};
  EXPECT_FALSE(in_L_K0(z));
  EXPECT_THROW(rank_one_decompose(z), PreconditionError);
}

TEST(Hull, FormulaAgreesWithOracle) {
  auto ins = sample_hull_points(100, true, 0.01, 2, 3);
  auto outs = sample_hull_points(100, false, 0.01, 2, 4);
  for (std::size_t i = 0; i < ins.size(); ++i) {
    EXPECT_LE(l_expression(ins[i]), -0.01);
    auto r = brute_force_hull_search(ins[i], 64, 100 + i);
    ASSERT_TRUE(r.found) << i;
    EXPECT_LT(r.residual, 1e-8);
  }
  for (std::size_t i = 0; i < outs.size(); ++i) {
    EXPECT_GE(l_expression(outs[i]), 0.01);
    EXPECT_FALSE(brute_force_hull_oracle(outs[i], 64, 500 + i)) << i;
  }
}

TEST(Hull, DecompositionMatchesOracleEndpoints) {
  // The oracle's connection on the line through z must hit the same two
  // sigma values when the decomposition is unique in 1D.
  ReducedPoint z{vec({1.5}), vec({0.35})};
  auto f = rank_one_decompose(z);
  auto r = brute_force_hull_search(z, 32, 9);
  ASSERT_TRUE(r.found);
  double a = std::min(f.t_minus * f.q(0), f.t_plus * f.q(0));
  double b = std::min(r.t_minus * r.q(0), r.t_plus * r.q(0));
  EXPECT_NEAR(a, b, 1e-7);
}

TEST(Hull, SDeltaEnvelope) {
  auto rep = s_delta_bounds_check(0.3, 20000, 2, 5);
  EXPECT_TRUE(rep.ok());
  EXPECT_GT(rep.inf_p, 1.0 / 3);
  EXPECT_LT(rep.sup_p, 3.0);
  EXPECT_GT(rep.inf_beta, 0.3);
  EXPECT_LT(rep.sup_beta, 0.5);
  EXPECT_THROW(s_delta_bounds_check(0.6, 10), PreconditionError);
}

TEST(Hull, BoundaryDistance) {
  const double d = 0.1;
  ReducedPoint z{vec({1, 0}), vec({0.3, 0})};
  ASSERT_TRUE(in_S_delta(z, d));
  double r = s_delta_boundary_distance(z, d);
  EXPECT_GT(r, 0);
  Vec gp, gb;
  s_delta_gradient(z, d, gp, gb);
  double gn = std::sqrt(gp.squaredNorm() + gb.squaredNorm());
  ReducedPoint e{z.p + r * gp / gn, z.beta + r * gb / gn};
  EXPECT_NEAR(s_delta_expression(e, d), 0, 1e-9);
  EXPECT_EQ(s_delta_boundary_distance({vec({1, 0}), vec({0.05, 0})}, d), 0);
}

TEST(Hull, SegmentAndKDelta) {
  const double d = 0.1;
  ReducedPoint z{vec({1, 0}), vec({0.3, 0})};
  auto f = rank_one_decompose(z);
  EXPECT_TRUE(segment_in_S_delta(f, z, d, 100));
  auto mb = m_bounds(d);
  Vec p = vec({0.5 * mb.m_minus, 0});
  EXPECT_TRUE(in_K_delta({p, sigma(p)}, d, 1e-12));
  EXPECT_FALSE(in_K_delta({p, sigma(p) + vec({1e-3, 0})}, d, 1e-8));
  EXPECT_NE(hull_csv_row(z, d, &f).find(','), std::string::npos);
  EXPECT_EQ(hull_csv_header(), "p,beta,l_expr,s_delta_expr,t_minus,t_plus,residual");
}

TEST(Hull, SamplerDeterministic) {
  auto a = sample_hull_points(10, true, 0.01, 2, 77);
  auto b = sample_hull_points(10, true, 0.01, 2, 77);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a[i].p, b[i].p);
}
