#include "cvxint/hull.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "cvxint/flux.hpp"

namespace cvxint {

Mat SpaceTimeJacobian::assemble() const {
  const auto n = p.size();
  Mat m(n + 1, n + 1);
  m.topLeftCorner(1, n) = p.transpose();
  m(0, n) = c;
  m.bottomLeftCorner(n, n) = B;
  m.bottomRightCorner(n, 1) = beta;
  return m;
}

double l_expression(const ReducedPoint& z) {
  double pb = z.p.dot(z.beta);
  return z.beta.squaredNorm() + pb * pb - pb;
}

double s_delta_expression(const ReducedPoint& z, double delta) {
  double pb = z.p.dot(z.beta);
  Vec w = (1 - pb) * z.p - z.beta;
  return delta * w.norm() + z.beta.squaredNorm() + pb * pb - pb;
}

bool in_L_K0(const ReducedPoint& z) { return l_expression(z) < 0; }

bool in_S_delta(const ReducedPoint& z, double delta) {
  if (delta >= 0.5) return false;
  return s_delta_expression(z, delta) < 0;
}

bool in_K_delta(const ReducedPoint& z, double delta, double tol) {
  double mm = m_bounds(delta).m_minus;
  return z.p.norm() <= mm + tol && (z.beta - sigma(z.p)).norm() <= tol;
}

void s_delta_gradient(const ReducedPoint& z, double delta, Vec& gp, Vec& gb) {
  double pb = z.p.dot(z.beta);
  Vec w = (1 - pb) * z.p - z.beta;
  double wn = w.norm();
  gp = (2 * pb - 1) * z.beta;
  gb = 2 * z.beta + (2 * pb - 1) * z.p;
  if (wn > 0) {
    Vec e = w / wn;
    gp += delta * ((1 - pb) * e - z.p.dot(e) * z.beta);
    gb += delta * (-(z.p.dot(e)) * z.p - e);
  }
}

double s_delta_boundary_distance(const ReducedPoint& z, double delta) {
  double F0 = s_delta_expression(z, delta);
  if (!(F0 < 0)) return 0;
  Vec gp, gb;
  s_delta_gradient(z, delta, gp, gb);
  double gn = std::sqrt(gp.squaredNorm() + gb.squaredNorm());
  if (gn == 0) return 0;
  Vec dp = gp / gn, db = gb / gn;
  auto F = [&](double s) {
    return s_delta_expression({z.p + s * dp, z.beta + s * db}, delta);
  };
  double lo = 0, hi = std::max(-F0 / gn, 1e-12);
  int guard = 0;
  while (F(hi) < 0 && guard++ < 80) {
    lo = hi;
    hi *= 2;
  }
  if (F(hi) < 0) return hi;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (F(mid) < 0 ? lo : hi) = mid;
  }
  return lo;
}

Mat RankOneFrame::eta() const {
  const auto n = q.size();
  Mat m(n + 1, n + 1);
  m.topLeftCorner(1, n) = q.transpose();
  m(0, n) = b;
  m.bottomLeftCorner(n, n) = gamma * q.transpose() / b;
  m.bottomRightCorner(n, 1) = gamma;
  return m;
}

double default_b(double t_minus, double t_plus) { return 1e-2 / (t_plus - t_minus); }

RankOneFrame rank_one_decompose(const ReducedPoint& z, std::optional<double> b_mag) {
  if (z.p.size() != z.beta.size() || z.p.size() < 1)
    throw PreconditionError("rank_one_decompose: dimension mismatch");
  double L = l_expression(z);
  if (!(L < 0)) throw PreconditionError("rank_one_decompose: point is not in L(K0)");
  if (L > -1e-12) throw PreconditionError("rank_one_decompose: point within 1e-12 of the hull boundary");

  const Vec& p = z.p;
  const Vec& beta = z.beta;
  double pb = p.dot(beta);
  double pp = p.squaredNorm(), bb = beta.squaredNorm();
  CaseScalars s;
  s.l = 1 / (1 - pb);
  double denom_k = (1 - pb) * pb - bb;
  s.k = ((1 - pb) * pp - pb) / denom_k;
  double wn = ((1 - pb) * p - beta).norm();
  s.u = denom_k / wn;
  s.x = s.k * s.u;
  s.v = s.x - 1 / s.u;
  s.y = s.l * s.v;
  double det = s.x * s.v - s.y * s.u;
  if (std::fabs(det) < 1e-300) throw NumericalError("rank_one_decompose: singular 2x2 system");

  RankOneFrame f;
  f.scalars = s;
  f.q = (s.v * p - s.y * beta) / det;
  f.gamma = (-s.u * p + s.x * beta) / det;
  double B = 2 * s.x - 1 / s.u;
  double C = s.x * s.x + f.gamma.squaredNorm() * s.y * s.y + 1 - s.x / s.u;
  double disc = B * B - 4 * C;
  if (disc < 1e-14) throw NumericalError("rank_one_decompose: t-quadratic discriminant below 1e-14");
  double sq = std::sqrt(disc);
  // Cancellation-free pair of roots.
  double qq = -0.5 * (B + (B >= 0 ? sq : -sq));
  double r1 = qq, r2 = C / qq;
  f.t_minus = std::min(r1, r2);
  f.t_plus = std::max(r1, r2);
  if (!(f.t_minus < 0 && f.t_plus > 0))
    throw NumericalError("rank_one_decompose: roots are not two-sided");
  f.lam = -f.t_minus / (f.t_plus - f.t_minus);
  f.b = b_mag.value_or(default_b(f.t_minus, f.t_plus));
  if (!(f.b != 0)) throw PreconditionError("rank_one_decompose: b must be nonzero");
  return f;
}

double frame_residual(const RankOneFrame& f, const ReducedPoint& z) {
  double r = 0;
  for (double t : {f.t_minus, f.t_plus}) {
    Vec d = sigma(z.p + t * f.q) - z.beta - t * f.gamma;
    r = std::max(r, d.norm());
  }
  return r;
}

namespace {

Vec random_unit(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> N(0, 1);
  Vec v(n);
  do {
    for (int i = 0; i < n; ++i) v(i) = N(rng);
  } while (v.norm() < 1e-8);
  return v / v.norm();
}

}  // namespace

EnvelopeReport s_delta_bounds_check(double delta, long samples, int dim, std::uint64_t seed) {
  if (!(delta > 0 && delta < 0.5)) throw PreconditionError("s_delta_bounds_check: delta in (0, 1/2)");
  auto mb = m_bounds(delta);
  EnvelopeReport rep;
  rep.delta = delta;
  rep.proposals = samples;
  rep.inf_p = rep.inf_beta = 1e300;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  const double pbox = mb.m_plus + 1, bbox = 0.6;
  for (long i = 0; i < samples; ++i) {
    ReducedPoint z{Vec(dim), Vec(dim)};
    if (i % 2 == 0) {
      // Uniform proposal in a box enclosing the envelope.
      for (int k = 0; k < dim; ++k) {
        z.p(k) = pbox * (2 * U(rng) - 1);
        z.beta(k) = bbox * (2 * U(rng) - 1);
      }
    } else {
      // Near-collinear proposal p = r e, beta ~ b e with a small tilt.
      Vec e = random_unit(rng, dim);
      double r = pbox * U(rng);
      double b = delta + (0.5 - delta) * U(rng);
      Vec tilt = random_unit(rng, dim);
      tilt -= tilt.dot(e) * e;
      Vec eb = e + 0.05 * U(rng) * tilt;
      eb /= eb.norm();
      z.p = r * e;
      z.beta = b * eb;
    }
    if (!in_S_delta(z, delta)) continue;
    ++rep.accepted;
    double np = z.p.norm(), nb = z.beta.norm();
    rep.sup_p = std::max(rep.sup_p, np);
    rep.inf_p = std::min(rep.inf_p, np);
    rep.sup_beta = std::max(rep.sup_beta, nb);
    rep.inf_beta = std::min(rep.inf_beta, nb);
    bool bad = !(mb.m_minus < np && np < mb.m_plus && delta < nb && nb < 0.5);
    if (bad) {
      ++rep.violations;
      if (rep.violating.size() < 10) {
        std::ostringstream os;
        os << "|p|=" << np << " |beta|=" << nb;
        rep.violating.push_back(os.str());
      }
    }
  }
  return rep;
}

namespace {

// Residual of the square system in (q, gamma, t_a, t_b).
Eigen::VectorXd oracle_F(const ReducedPoint& z, const Eigen::VectorXd& X, int n) {
  Vec q = X.segment(0, n), g = X.segment(n, n);
  double ta = X(2 * n), tb = X(2 * n + 1);
  Eigen::VectorXd F(2 * n + 2);
  F.segment(0, n) = sigma(z.p + ta * q) - z.beta - ta * g;
  F.segment(n, n) = sigma(z.p + tb * q) - z.beta - tb * g;
  F(2 * n) = q.squaredNorm() - 1;
  F(2 * n + 1) = g.dot(q);
  return F;
}

Eigen::MatrixXd oracle_J(const ReducedPoint& z, const Eigen::VectorXd& X, int n) {
  Vec q = X.segment(0, n), g = X.segment(n, n);
  double t[2] = {X(2 * n), X(2 * n + 1)};
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n + 2, 2 * n + 2);
  for (int s = 0; s < 2; ++s) {
    Mat Js = sigma_jacobian(z.p + t[s] * q);
    J.block(s * n, 0, n, n) = t[s] * Js;
    J.block(s * n, n, n, n) = -t[s] * Eigen::MatrixXd::Identity(n, n);
    J.block(s * n, 2 * n + s, n, 1) = Js * q - g;
  }
  J.block(2 * n, 0, 1, n) = 2 * q.transpose();
  J.block(2 * n + 1, 0, 1, n) = g.transpose();
  J.block(2 * n + 1, n, 1, n) = q.transpose();
  return J;
}

}  // namespace

OracleResult brute_force_hull_search(const ReducedPoint& z, int directions, std::uint64_t seed) {
  const int n = static_cast<int>(z.p.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  OracleResult out;
  for (int d = 0; d < directions; ++d) {
    out.tried = d + 1;
    Vec q = random_unit(rng, n);
    Vec g = random_unit(rng, n);
    g -= g.dot(q) * q;
    if (g.norm() > 1e-12) g *= 10 * U(rng) / g.norm();
    Eigen::VectorXd X(2 * n + 2);
    X.segment(0, n) = q;
    X.segment(n, n) = g;
    X(2 * n) = -4 * U(rng);
    X(2 * n + 1) = 4 * U(rng);
    Eigen::VectorXd F = oracle_F(z, X, n);
    double res = F.norm();
    for (int it = 0; it < 50 && res > 1e-13; ++it) {
      Eigen::VectorXd step = oracle_J(z, X, n).colPivHouseholderQr().solve(-F);
      if (!step.allFinite()) break;
      double a = 1;
      Eigen::VectorXd Xn = X + step;
      Eigen::VectorXd Fn = oracle_F(z, Xn, n);
      int halvings = 0;
      while (!(Fn.norm() < res) && halvings++ < 20) {
        a *= 0.5;
        Xn = X + a * step;
        Fn = oracle_F(z, Xn, n);
      }
      if (!(Fn.norm() < res)) break;
      X = Xn;
      F = Fn;
      res = F.norm();
    }
    double ta = X(2 * n), tb = X(2 * n + 1);
    double tm = std::min(ta, tb), tp = std::max(ta, tb);
    if (F.lpNorm<Eigen::Infinity>() < 1e-8 && tm < -1e-6 && tp > 1e-6) {
      out.found = true;
      out.residual = F.lpNorm<Eigen::Infinity>();
      out.q = X.segment(0, n);
      out.gamma = X.segment(n, n);
      out.t_minus = tm;
      out.t_plus = tp;
      return out;
    }
  }
  return out;
}

bool brute_force_hull_oracle(const ReducedPoint& z, int directions, std::uint64_t seed) {
  return brute_force_hull_search(z, directions, seed).found;
}

std::vector<ReducedPoint> sample_hull_points(long count, bool inside, double margin, int dim,
                                             std::uint64_t seed) {
  if (count < 0 || !(margin >= 0) || dim < 1 || dim > kMaxDim)
    throw PreconditionError("sample_hull_points: bad arguments");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<ReducedPoint> out;
  while (static_cast<long>(out.size()) < count) {
    ReducedPoint z{Vec(dim), Vec(dim)};
    for (int k = 0; k < dim; ++k) {
      z.p(k) = 3 * U(rng);
      z.beta(k) = 0.6 * U(rng);
    }
    double e = l_expression(z);
    if (inside ? e <= -margin : e >= margin) out.push_back(z);
  }
  return out;
}

bool segment_in_S_delta(const RankOneFrame& f, const ReducedPoint& z, double delta, int samples) {
  ReducedPoint a = f.endpoint(z, f.t_minus), b = f.endpoint(z, f.t_plus);
  for (int k = 1; k <= samples; ++k) {
    double s = static_cast<double>(k) / (samples + 1);
    ReducedPoint m{(1 - s) * a.p + s * b.p, (1 - s) * a.beta + s * b.beta};
    if (!in_S_delta(m, delta)) return false;
  }
  return true;
}

std::string hull_csv_header() {
  return "p,beta,l_expr,s_delta_expr,t_minus,t_plus,residual";
}

std::string hull_csv_row(const ReducedPoint& z, double delta, const RankOneFrame* f) {
  auto join = [](const Vec& v) {
    std::ostringstream os;
    os.precision(17);
    for (int i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v(i);
    return os.str();
  };
  std::ostringstream os;
  os.precision(17);
  os << join(z.p) << ',' << join(z.beta) << ',' << l_expression(z) << ','
     << s_delta_expression(z, delta) << ',';
  if (f)
    os << f->t_minus << ',' << f->t_plus << ',' << frame_residual(*f, z);
  else
    os << ",,";
  return os.str();
}

}  // namespace cvxint
