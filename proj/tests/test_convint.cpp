#include <gtest/gtest.h>

#include <cmath>

#include "cvxint/convint.hpp"
#include "cvxint/flux.hpp"

using namespace cvxint;

namespace {

BoxDomain spacetime_unit(int n) {
  BoxDomain G = BoxDomain::unit(n);
  G.time_interval = Interval{0, 1};
  return G;
}

}  // namespace

TEST(Staircase, EndsAndLevels) {
  auto S = staircase_profile(0.6, 1.4, -0.5, 1.5, 0.05);
  double f, fp, fpp;
  S.eval(S.k, f, fp, fpp);
  EXPECT_NEAR(f, 0, 1e-12);
  EXPECT_NEAR(fp, 0, 1e-12);
  S.eval(S.l, f, fp, fpp);
  EXPECT_NEAR(f, 0, 1e-12);
  EXPECT_NEAR(fp, 0, 1e-12);
  // f'' sits on a level outside the measured corner set.
  const int m = 200000;
  double off = 0;
  for (int i = 0; i < m; ++i) {
    double s = S.k + (S.l - S.k) * (i + 0.5) / m;
    double v = S.second(s);
    if (std::fabs(v + 0.6) > 1e-12 && std::fabs(v - 1.4) > 1e-12) off += (S.l - S.k) / m;
  }
  EXPECT_NEAR(off, S.nonlevel_measure(), 0.02 * S.nonlevel_measure() + 4 * (S.l - S.k) / m);
}

TEST(Staircase, AntiderivativesMatchQuadrature) {
  auto S = StaircaseProfile::make(0.8, 0.3, 0, 1, 7, 0.004, true);
  const int m = 400000;
  const double h = (S.l - S.k) / m;
  double F = 0, Fp = 0, worst_f = 0, worst_fp = 0, sup_fp = 0;
  double f, fp, fpp, prev;
  S.eval(S.k, f, fp, prev);
  for (int i = 1; i <= m; ++i) {
    double s = S.k + i * h;
    S.eval(s, f, fp, fpp);
    double Fp_new = Fp + 0.5 * h * (prev + fpp);
    F += 0.5 * h * (Fp + Fp_new);
    Fp = Fp_new;
    prev = fpp;
    worst_f = std::max(worst_f, std::fabs(F - f));
    worst_fp = std::max(worst_fp, std::fabs(Fp - fp));
    sup_fp = std::max(sup_fp, std::fabs(fp));
  }
  EXPECT_LT(worst_fp, 1e-8);
  EXPECT_LT(worst_f, 1e-8);
  EXPECT_LE(sup_fp, S.slope_bound() * (1 + 1e-9));
  auto back = StaircaseProfile::from_json(S.to_json());
  back.eval(0.37, f, fp, fpp);
  double g, gp, gpp;
  S.eval(0.37, g, gp, gpp);
  EXPECT_DOUBLE_EQ(f, g);
}

TEST(Staircase, Preconditions) {
  EXPECT_THROW(staircase_profile(0.5, 0.5, 0, 1, 0.3), PreconditionError);
  EXPECT_THROW(StaircaseProfile::make(0.5, 0.5, 0, 1, 4, 0.2, false), PreconditionError);
  EXPECT_THROW(StaircaseProfile::make(-1, 0.5, 0, 1, 4, 0.001, false), PreconditionError);
}

TEST(Convint, POperatorDivergenceFree) {
  ReducedPoint z{vec({1, 0.5}), vec({0.3, 0})};
  auto f = rank_one_decompose(z);
  HJet h;
  h.h = 0.3;
  h.dh = vec({0.2, -0.7});
  h.d2h = Mat(2, 2);
  h.d2h << 1.5, -0.4, -0.4, 2.0;
  h.ht = 0.1;
  h.dht = vec({0.05, 0.3});
  auto w = p_operator(h, f);
  EXPECT_NEAR(w.phi, f.q.dot(h.dh), 1e-15);
  EXPECT_NEAR(w.dpsi.trace(), 0, 1e-12);
  EXPECT_EQ(w.gradient().rows(), 3);
}

TEST(Convint, OscillationCertificates) {
  ReducedPoint z{vec({1, 0}), vec({0.3, 0})};
  auto P = build_oscillation({rank_one_decompose(z), 1, 1, spacetime_unit(2), 0.1}, 32);
  EXPECT_TRUE(P.osc.passed()) << P.osc.to_json().dump();
  EXPECT_LT(P.osc.nonlevel_measure, 0.1);
  // w vanishes on the boundary of the box.
  auto w = P.eval(vec({0.0, 0.4}), 0.5);
  EXPECT_NEAR(w.phi, 0, 1e-14);
  EXPECT_FALSE(P.inside(vec({0.0, 0.4}), 0.5));
  auto back = Patch::from_json(P.to_json());
  auto w1 = back.eval(vec({0.31, 0.42}), 0.53), w2 = P.eval(vec({0.31, 0.42}), 0.53);
  EXPECT_DOUBLE_EQ(w1.phi, w2.phi);
}

TEST(Convint, PatchCertificatesCaseOne) {
  ReducedPoint z{vec({1, 0}), vec({0.3, 0})};
  auto G = spacetime_unit(2);
  auto P = build_patch(z, 0.1, G, 1e-2, 0.1, G, 32);
  EXPECT_TRUE(P.cert.passed()) << P.cert.to_json().dump();
  EXPECT_LE(P.cert.div_psi, 1e-8);
  EXPECT_EQ(P.cert.membership_failures, 0);
  EXPECT_LE(P.cert.residual_integral, P.cert.residual_budget);
  EXPECT_TRUE(P.cert.rho0_certified);
}

TEST(Convint, PatchCertificatesCaseTwo) {
  ReducedPoint z{vec({1, 0.5}), vec({0.3, 0})};
  auto G = spacetime_unit(2);
  auto P = build_patch(z, 0.05, G, 1e-2, 0.1, G, 24);
  EXPECT_TRUE(P.cert.passed()) << P.cert.to_json().dump();
  // psi is divergence free at an interior point even with gamma != 0.
  auto w = P.eval(vec({0.5, 0.5}), 0.5);
  EXPECT_NEAR(w.dpsi.trace(), 0, 1e-8);
}

TEST(Convint, PatchRejectsOutsideTarget) {
  ReducedPoint z{vec({1, 0}), vec({0.05, 0})};
  auto G = spacetime_unit(2);
  EXPECT_THROW(build_patch(z, 0.1, G, 1e-2, 0.1, G, 16), ConstructionError);
}

TEST(Convint, AlignedPatch) {
  ReducedPoint z{vec({1.0}), vec({0.4})};
  auto f = rank_one_decompose(z);
  BoxDomain G = BoxDomain::unit(1);
  G.time_interval = Interval{0, 1};
  AlignedPatchParams prm;
  prm.periods = 3;
  auto P = make_aligned_patch(z, 0.345, f, G, prm);
  // Gradient at the plateau equals one of the shrunk endpoints.
  double lam1 = P.lam1, lam2 = P.lam2;
  int hits = 0;
  for (int i = 1; i < 100; ++i) {
    auto w = P.eval(vec({i / 100.0}), 0.5);
    double d = w.dphi(0) * f.q(0);
    if (std::fabs(d + lam1) < 1e-9 || std::fabs(d - lam2) < 1e-9) ++hits;
  }
  EXPECT_GT(hits, 80);
  RankOneFrame bad = f;
  bad.gamma = vec({0.1});
  EXPECT_THROW(make_aligned_patch(z, 0.345, bad, G, prm), PreconditionError);
}

TEST(Convint, SegmentDistance) {
  Mat eta = Mat::Identity(2, 2);
  EXPECT_NEAR(segment_distance(0.5 * eta, eta, 1, 1), 0, 1e-15);
  EXPECT_NEAR(segment_distance(3 * eta, eta, 1, 1), 2 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(endpoint_distance(-eta, eta, 1, 1), 0, 1e-15);
  RankOneFrame f = rank_one_decompose({vec({1, 0}), vec({0.3, 0})});
  auto g = frame_from_json(frame_to_json(f));
  EXPECT_DOUBLE_EQ(g.t_plus, f.t_plus);
}
