#include "cvxint/staircase.hpp"

#include <algorithm>
#include <cmath>

#include "cvxint/common.hpp"

namespace cvxint {

void PolyPiece::eval(double y, double& f, double& fp, double& fpp) const {
  const double x = (y - start) / len;
  double s2 = 0, s1 = 0, s0 = 0;
  for (int j = 5; j >= 0; --j) {
    s2 = s2 * x + c2[j];
    s1 = s1 * x + c2[j] / (j + 1);
    s0 = s0 * x + c2[j] / ((j + 1) * (j + 2));
  }
  fpp = s2;
  fp = f1 + len * x * s1;
  f = f0 + f1 * len * x + len * len * x * x * s0;
}

namespace {

PolyPiece level(double start, double len, double v) {
  PolyPiece p;
  p.start = start;
  p.len = len;
  p.c2[0] = v;
  return p;
}

// A + (B - A) S5(x), S5 = 10x^3 - 15x^4 + 6x^5.
PolyPiece transition(double start, double len, double A, double B) {
  PolyPiece p;
  p.start = start;
  p.len = len;
  p.c2[0] = A;
  p.c2[3] = 10 * (B - A);
  p.c2[4] = -15 * (B - A);
  p.c2[5] = 6 * (B - A);
  return p;
}

// Chains f', f through the pieces starting from zero; returns (f', f) at the end.
std::pair<double, double> chain(std::vector<PolyPiece>& ps) {
  double f1 = 0, f0 = 0;
  for (auto& p : ps) {
    p.f1 = f1;
    p.f0 = f0;
    double f, fp, fpp;
    p.eval(p.start + p.len, f, fp, fpp);
    f1 = fp;
    f0 = f;
  }
  return {f1, f0};
}

void eval_pieces(const std::vector<PolyPiece>& ps, double y, double& f, double& fp, double& fpp) {
  auto it = std::upper_bound(ps.begin(), ps.end(), y,
                             [](double v, const PolyPiece& p) { return v < p.start; });
  const PolyPiece& p = it == ps.begin() ? ps.front() : *(it - 1);
  p.eval(y, f, fp, fpp);
}

}  // namespace

double StaircaseProfile::slope_bound() const { return lam1 * lam2 * period / (2 * (lam1 + lam2)); }

void StaircaseProfile::build() {
  const double L0 = flip ? lam2 : -lam1;
  const double L1 = flip ? -lam1 : lam2;
  const double a0 = period * std::fabs(L1) / (lam1 + lam2);
  const double a1 = period - a0;
  const double s1 = a0 / 2, s2 = a0 / 2 + a1, r = corner;
  const double e = L0 * r / (L0 - L1);  // shift of the first corner that pays for the edge ramp
  if (!(r > 0) || s1 - r <= 2 * r + e || 2 * r >= a1 - e || s2 + r >= period)
    throw PreconditionError("staircase_profile: corner radius does not fit the period");

  base_ = {level(0, s1 - r, L0), transition(s1 - r, 2 * r, L0, L1), level(s1 + r, s2 - s1 - 2 * r, L1),
           transition(s2 - r, 2 * r, L1, L0), level(s2 + r, period - s2 - r, L0)};
  chain(base_);
  first_ = {transition(0, 2 * r, 0, L0), level(2 * r, s1 + e - 3 * r, L0),
            transition(s1 + e - r, 2 * r, L0, L1), level(s1 + e + r, s2 - s1 - e - 2 * r, L1),
            transition(s2 - r, 2 * r, L1, L0), level(s2 + r, period - s2 - r, L0)};
  offset_ = chain(first_).second;

  sup_f_ = 0;
  const int m = 4096;
  for (int i = 0; i <= m; ++i) {
    double f, fp, fpp, y = period * i / m;
    eval_pieces(first_, y, f, fp, fpp);
    sup_f_ = std::max(sup_f_, std::fabs(f));
    if (periods > 2) {
      eval_pieces(base_, y, f, fp, fpp);
      sup_f_ = std::max(sup_f_, std::fabs(f + offset_));
    }
  }
}

StaircaseProfile StaircaseProfile::make(double lam1, double lam2, double k, double l, int periods,
                                        double corner, bool flip) {
  if (!(lam1 > 0 && lam2 > 0)) throw PreconditionError("staircase_profile: levels must be positive");
  if (!(k < l)) throw PreconditionError("staircase_profile: need k < l");
  if (periods < 1) throw PreconditionError("staircase_profile: need at least one period");
  StaircaseProfile s;
  s.lam1 = lam1;
  s.lam2 = lam2;
  s.k = k;
  s.l = l;
  s.periods = periods;
  s.period = (l - k) / periods;
  s.corner = corner;
  s.flip = flip;
  s.build();
  return s;
}

void StaircaseProfile::eval_left(double y, double& f, double& fp, double& fpp) const {
  if (y < period) {
    eval_pieces(first_, y, f, fp, fpp);
    return;
  }
  double j = std::floor(y / period);
  eval_pieces(base_, y - j * period, f, fp, fpp);
  f += offset_;
}

void StaircaseProfile::eval(double s, double& f, double& fp, double& fpp) const {
  const double L = l - k;
  double y = s - k;
  if (!(y > 0 && y < L)) {
    f = fp = fpp = 0;
    return;
  }
  if (y <= 0.5 * L) {
    eval_left(y, f, fp, fpp);
  } else {
    eval_left(L - y, f, fp, fpp);
    fp = -fp;
  }
}

double StaircaseProfile::second(double s) const {
  double f, fp, fpp;
  eval(s, f, fp, fpp);
  return fpp;
}

nlohmann::json StaircaseProfile::to_json() const {
  return {{"lam1", lam1}, {"lam2", lam2}, {"k", k},          {"l", l},
          {"period", period}, {"corner", corner}, {"periods", periods}, {"flip", flip}};
}

StaircaseProfile StaircaseProfile::from_json(const nlohmann::json& j) {
  return make(j.at("lam1"), j.at("lam2"), j.at("k"), j.at("l"), j.at("periods"), j.at("corner"),
              j.at("flip"));
}

StaircaseProfile staircase_profile(double lam1, double lam2, double k, double l, double tau,
                                   std::optional<double> period, bool flip) {
  if (!(k < l)) throw PreconditionError("staircase_profile: need k < l");
  if (!(tau > 0 && tau < (l - k) / 4)) throw PreconditionError("staircase_profile: need 0 < tau < (l-k)/4");
  if (!(lam1 > 0 && lam2 > 0)) throw PreconditionError("staircase_profile: levels must be positive");
  double P0 = period ? *period : tau * std::min({1.0, lam1, lam2}) / (4 * (lam1 + lam2));
  if (!(P0 > 0)) throw PreconditionError("staircase_profile: period must be positive");
  double n = std::ceil((l - k) / P0 - 1e-9);
  if (n > 1e9) throw PreconditionError("staircase_profile: period underflows the representable range");
  int N = std::max(1, static_cast<int>(n));
  double P = (l - k) / N;
  double amin = P * std::min(lam1, lam2) / (lam1 + lam2);
  double r = std::min({P / 64, tau / (8.0 * (N + 1)), amin / 8});
  return StaircaseProfile::make(lam1, lam2, k, l, N, r, flip);
}

}  // namespace cvxint
