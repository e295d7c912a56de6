#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvxint/common.hpp"

namespace cvxint {

// Reduced coordinates (p, beta) of a block matrix [[p, c], [B, beta]].
struct ReducedPoint {
  Vec p;
  Vec beta;
};

// Full space-time Jacobian [[p, c], [B, beta]] of (u, v).
struct SpaceTimeJacobian {
  Vec p;
  double c = 0;
  Mat B;
  Vec beta;
  double trace_deviation(double s) const { return std::abs(B.trace() - s); }
  Mat assemble() const;
};

double l_expression(const ReducedPoint& z);                      // |b|^2 + (p.b)^2 - p.b
double s_delta_expression(const ReducedPoint& z, double delta);  // delta |(1-p.b)p - b| + l
bool in_L_K0(const ReducedPoint& z);
bool in_S_delta(const ReducedPoint& z, double delta);
bool in_K_delta(const ReducedPoint& z, double delta, double tol);

// Gradient of the S_delta defining expression in (p, beta).
void s_delta_gradient(const ReducedPoint& z, double delta, Vec& gp, Vec& gb);

// Distance to the S_delta boundary, estimated by bisection along the
// gradient direction of the defining expression. Zero outside S_delta.
double s_delta_boundary_distance(const ReducedPoint& z, double delta);

struct CaseScalars {
  double l = 0, k = 0, u = 0, x = 0, v = 0, y = 0;
};

struct RankOneFrame {
  Vec q;
  Vec gamma;
  double b = 0;
  double t_minus = 0;
  double t_plus = 0;
  double lam = 0;
  CaseScalars scalars;

  ReducedPoint endpoint(const ReducedPoint& z, double t) const {
    return {z.p + t * q, z.beta + t * gamma};
  }
  // eta = [[q, b], [gamma (x) q / b, gamma]] as an (n+1)x(n+1) matrix.
  Mat eta() const;
  // Reduced part (q, gamma) norm.
  double reduced_norm() const { return std::sqrt(q.squaredNorm() + gamma.squaredNorm()); }
};

double default_b(double t_minus, double t_plus);

// Closed-form two-sided rank-one connection; throws PreconditionError
// outside L(K0) or within 1e-12 of its boundary, NumericalError when the
// quadratic for t is degenerate.
RankOneFrame rank_one_decompose(const ReducedPoint& z, std::optional<double> b_mag = std::nullopt);

// max over the two endpoints of |sigma(p + t q) - beta - t gamma|.
double frame_residual(const RankOneFrame& f, const ReducedPoint& z);

struct EnvelopeReport {
  double delta = 0;
  long proposals = 0;
  long accepted = 0;
  long violations = 0;
  double sup_p = 0, inf_p = 0, sup_beta = 0, inf_beta = 0;
  std::vector<std::string> violating;  // first few offenders
  bool ok() const { return violations == 0 && accepted > 0; }
};

EnvelopeReport s_delta_bounds_check(double delta, long samples, int dim = 2,
                                    std::uint64_t seed = 20240917);

struct OracleResult {
  bool found = false;
  int tried = 0;
  double residual = 0;
  Vec q, gamma;
  double t_minus = 0, t_plus = 0;
};

// Independent Newton search for a two-sided connection sigma(p + t q) =
// beta + t gamma with |q| = 1, gamma.q = 0, t_- < 0 < t_+.
OracleResult brute_force_hull_search(const ReducedPoint& z, int directions, std::uint64_t seed);
bool brute_force_hull_oracle(const ReducedPoint& z, int directions, std::uint64_t seed = 7);

// Seeded points with l_expression <= -margin (inside) or >= +margin,
// drawn uniformly from |p_i| <= 3, |beta_i| <= 0.6 by rejection.
std::vector<ReducedPoint> sample_hull_points(long count, bool inside, double margin, int dim,
                                             std::uint64_t seed);

bool segment_in_S_delta(const RankOneFrame& f, const ReducedPoint& z, double delta, int samples);

std::string hull_csv_header();
std::string hull_csv_row(const ReducedPoint& z, double delta, const RankOneFrame* f);

}  // namespace cvxint
