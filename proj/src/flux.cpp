#include "cvxint/flux.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace cvxint {

namespace {

constexpr int kKnots = 4096;

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGLx = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGLw = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss8(const F& fn, double a, double b) {
  double c = 0.5 * (a + b), r = 0.5 * (b - a), acc = 0;
  for (int i = 0; i < 8; ++i) acc += kGLw[i] * fn(c + r * kGLx[i]);
  return acc * r;
}

template <class F>
double simpson_rec(const F& fn, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = fn(lm), frm = fn(rm);
  double left = (m - a) / 6 * (fa + 4 * flm + fm);
  double right = (b - m) / 6 * (fm + 4 * frm + fb);
  double diff = left + right - whole;
  if (depth <= 0 || std::fabs(diff) <= 15 * tol) return left + right + diff / 15;
  return simpson_rec(fn, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_rec(fn, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

template <class F>
double adaptive_simpson(const F& fn, double a, double b, double tol) {
  double fa = fn(a), fb = fn(b), fm = fn(0.5 * (a + b));
  double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return simpson_rec(fn, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace

double rho(double s) { return s / (1 + s * s); }

double rho_prime(double s) {
  double d = 1 + s * s;
  return (1 - s * s) / (d * d);
}

double rho_second(double s) {
  double d = 1 + s * s;
  return 2 * s * (s * s - 3) / (d * d * d);
}

Vec sigma(const Vec& p) { return p / (1 + p.squaredNorm()); }

Mat sigma_jacobian(const Vec& p) {
  double d = 1 + p.squaredNorm();
  Mat J = Mat::Identity(p.size(), p.size()) / d;
  J -= 2 * p * p.transpose() / (d * d);
  return J;
}

MBounds m_bounds(double delta) {
  if (!(delta > 0 && delta < 0.5)) throw std::domain_error("m_bounds: delta must lie in (0, 1/2)");
  double r = std::sqrt(1 - 4 * delta * delta);
  // The small root in a cancellation-free form; product of the roots is 1.
  double mp = (1 + r) / (2 * delta);
  return {1 / mp, mp};
}

double smoothstep7(double x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  double x4 = x * x * x * x;
  return x4 * (35 - 84 * x + 70 * x * x - 20 * x * x * x);
}

double smoothstep7_prime(double x) {
  if (x <= 0 || x >= 1) return 0;
  double y = x * (1 - x);
  return 140 * y * y * y;
}

double FluxProfile::g(double s) const {
  if (s <= m_minus) return rho_prime(s);
  double x = (s - m_minus) / blend_width;
  if (x >= 1) return theta;
  return theta + (rho_prime(s) - theta) * (1 - smoothstep7(x));
}

double FluxProfile::g_prime(double s) const {
  if (s <= m_minus) return rho_second(s);
  double x = (s - m_minus) / blend_width;
  if (x >= 1) return 0;
  return rho_second(s) * (1 - smoothstep7(x)) -
         (rho_prime(s) - theta) * smoothstep7_prime(x) / blend_width;
}

FluxProfile FluxProfile::make(double delta, double Lambda, double theta, double blend_width,
                              int dim) {
  FluxProfile p;
  auto mb = m_bounds(delta);
  p.delta = delta;
  p.Lambda = Lambda;
  p.theta = theta;
  p.Theta = 1.0;
  p.blend_width = blend_width;
  p.dim = dim;
  p.m_minus = mb.m_minus;
  p.m_plus = mb.m_plus;
  p.knot_h_ = blend_width / (kKnots - 1);
  p.knot_val_.assign(kKnots, 0.0);
  p.knot_val_[0] = rho(p.m_minus);
  auto gf = [&p](double s) { return p.g(s); };
  for (int k = 1; k < kKnots; ++k) {
    double a = p.m_minus + (k - 1) * p.knot_h_, b = p.m_minus + k * p.knot_h_;
    p.knot_val_[k] = p.knot_val_[k - 1] + adaptive_simpson(gf, a, b, 1e-10 / kKnots);
  }
  p.tail_value_ = p.knot_val_.back();
  return p;
}

double FluxProfile::rho_star(double s) const {
  s = std::fabs(s);
  if (s <= m_minus) return rho(s);
  double end = m_minus + blend_width;
  if (s >= end) return tail_value_ + theta * (s - end);
  int k = static_cast<int>(std::floor((s - m_minus) / knot_h_));
  k = std::clamp(k, 0, kKnots - 2);
  double a = m_minus + k * knot_h_;
  // Nearest knot plus a local quadrature keeps (rho*)' identical to g.
  if (s - a > 0.5 * knot_h_) {
    double b = a + knot_h_;
    return knot_val_[k + 1] - gauss8([this](double x) { return g(x); }, s, b);
  }
  return knot_val_[k] + gauss8([this](double x) { return g(x); }, a, s);
}

double FluxProfile::rho_star_prime(double s) const { return g(std::fabs(s)); }
double FluxProfile::rho_star_second(double s) const { return g_prime(std::fabs(s)); }

double FluxProfile::f(double s) const {
  if (s <= 0) return 1.0;
  double r = std::sqrt(s);
  return rho_star(r) / r;
}

double FluxProfile::f_prime(double s) const {
  if (s <= 0) return -1.0;  // f = 1/(1+s) near the origin
  double r = std::sqrt(s);
  return (rho_star_prime(r) * r - rho_star(r)) / (2 * r * r * r);
}

nlohmann::json FluxProfile::to_json() const {
  nlohmann::json j;
  j["delta"] = delta;
  j["Lambda"] = Lambda;
  j["theta"] = theta;
  j["Theta"] = Theta;
  j["blend_width"] = blend_width;
  j["dim"] = dim;
  j["m_minus"] = m_minus;
  j["m_plus"] = m_plus;
  j["knot_spacing"] = knot_h_;
  j["knots"] = knot_val_;
  return j;
}

FluxProfile FluxProfile::from_json(const nlohmann::json& j) {
  FluxProfile p;
  p.delta = j.at("delta").get<double>();
  p.Lambda = j.at("Lambda").get<double>();
  p.theta = j.at("theta").get<double>();
  p.Theta = j.at("Theta").get<double>();
  p.blend_width = j.at("blend_width").get<double>();
  p.dim = j.at("dim").get<int>();
  auto mb = m_bounds(p.delta);
  p.m_minus = mb.m_minus;
  p.m_plus = mb.m_plus;
  p.knot_h_ = j.at("knot_spacing").get<double>();
  p.knot_val_ = j.at("knots").get<std::vector<double>>();
  if (p.knot_val_.size() != static_cast<std::size_t>(kKnots))
    throw std::invalid_argument("FluxProfile::from_json: knot table has wrong length");
  p.tail_value_ = p.knot_val_.back();
  return p;
}

ProfileCheck validate_profile(const FluxProfile& prof, int samples) {
  ProfileCheck c;
  double smax = 2 * prof.m_plus;
  c.min_slope = c.min_secant = 1e300;
  c.max_slope = c.max_secant = -1e300;
  for (int i = 0; i <= samples; ++i) {
    double s = smax * i / samples;
    double d = prof.rho_star_prime(s);
    c.min_slope = std::min(c.min_slope, d);
    c.max_slope = std::max(c.max_slope, d);
    if (s > 0) {
      double sec = prof.rho_star(s) / s;
      c.min_secant = std::min(c.min_secant, sec);
      c.max_secant = std::max(c.max_secant, sec);
      // f + 2 s f' evaluated through f itself, on the squared variable.
      double q = s * s;
      double ell = prof.f(q) + 2 * q * prof.f_prime(q);
      if (ell < prof.theta - 1e-9 || ell > prof.Theta + 1e-9) {
        c.ok = false;
        c.failure = "f + 2 s f' outside [theta, Theta]";
      }
    }
  }
  for (int i = 0; i <= samples; ++i) {
    double s = prof.m_minus * i / samples;
    c.max_identity_gap = std::max(c.max_identity_gap, std::fabs(prof.rho_star(s) - rho(s)));
  }
  c.max_undercut_violation = -1e300;
  for (int i = 1; i <= samples; ++i) {
    double s = prof.m_minus + (prof.Lambda - prof.m_minus) * i / samples;
    c.max_undercut_violation = std::max(c.max_undercut_violation, prof.rho_star(s) - rho(s));
  }
  if (std::fabs(prof.f(0) - 1) > 1e-15) {
    c.ok = false;
    c.failure = "f(0) != 1";
  }
  if (c.min_slope < prof.theta - 1e-14 || c.max_slope > prof.Theta + 1e-14) {
    c.ok = false;
    c.failure = "(rho*)' outside [theta, Theta]";
  }
  if (c.min_secant < prof.theta - 1e-14 || c.max_secant > prof.Theta + 1e-14) {
    c.ok = false;
    c.failure = "rho*(s)/s outside [theta, Theta]";
  }
  if (c.max_identity_gap > 1e-14) {
    c.ok = false;
    c.failure = "rho* differs from rho on [0, m_minus]";
  }
  if (c.max_undercut_violation >= 0) {
    c.ok = false;
    c.failure = "rho* does not undercut rho on (m_minus, Lambda]";
  }
  return c;
}

double selected_delta(double M, double lambda_slack) {
  if (M < 1) return 0.9 * M / (1 + M * M);
  double s = M + lambda_slack;
  return s / (1 + s * s);
}

FluxProfile build_profile(double M, double lambda_slack, int dim,
                          std::optional<double> blend_width) {
  if (!(M > 0)) throw PreconditionError("build_profile: M must be positive");
  double delta, Lambda;
  if (M < 1) {
    delta = selected_delta(M, lambda_slack);
    Lambda = (1 + m_bounds(delta).m_plus) / 2;
  } else {
    if (!(lambda_slack > 0)) throw PreconditionError("build_profile: lambda_slack must be positive");
    delta = selected_delta(M, lambda_slack);
    Lambda = M + lambda_slack / 2;
  }
  auto mb = m_bounds(delta);
  if (!(M < Lambda && Lambda < mb.m_plus))
    throw ConstructionError("build_profile: selection rule violated M < Lambda < m_plus");
  double theta = (rho(Lambda) - delta) / (4 * (Lambda - mb.m_minus));
  double w = blend_width.value_or(0.5 * (Lambda - mb.m_minus));
  std::string last;
  for (int attempt = 0; attempt <= 16; ++attempt, w *= 0.5) {
    auto prof = FluxProfile::make(delta, Lambda, theta, w, dim);
    auto chk = validate_profile(prof);
    if (chk.ok) return prof;
    last = chk.failure;
  }
  throw ConstructionError("build_profile: validation failed after 16 retries: " + last);
}

Vec A_flux(const FluxProfile& prof, const Vec& p) {
  double r = p.norm();
  if (r == 0) return Vec::Zero(p.size());
  if (r <= prof.m_minus) return sigma(p);
  return prof.rho_star(r) / r * p;
}

Mat A_jacobian(const FluxProfile& prof, const Vec& p) {
  const auto n = p.size();
  double r = p.norm();
  if (r == 0) return Mat::Identity(n, n);
  if (r <= prof.m_minus) return sigma_jacobian(p);
  double a = prof.rho_star(r) / r;
  Vec e = p / r;
  Mat J = a * Mat::Identity(n, n);
  J += (prof.rho_star_prime(r) - a) * e * e.transpose();
  return J;
}

}  // namespace cvxint
