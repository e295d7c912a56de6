#pragma once

#include <json.hpp>
#include <optional>
#include <vector>

namespace cvxint {

// Piecewise polynomial in a normalized variable x in [0,1] over one piece
// of length len, with exact first and second antiderivatives.
struct PolyPiece {
  double start = 0, len = 0;
  double c2[6] = {0, 0, 0, 0, 0, 0};  // f'' as polynomial in x
  double f1 = 0, f0 = 0;              // f' and f at the piece start
  void eval(double y, double& f, double& fp, double& fpp) const;
};

// Compactly supported profile on [k, l] whose second derivative alternates
// between -lam1 and lam2 on a whole number of periods. Each period is laid out
// [L0 for a0/2][L1 for a1][L0 for a0/2] with smoothstep corners of radius r,
// so f and f' vanish at every period boundary; the first and last stretches
// ramp from zero and the whole profile is even about the midpoint, which
// makes f, f' vanish at k and l without an envelope.
struct StaircaseProfile {
  double lam1 = 0, lam2 = 0;
  double k = 0, l = 0;
  double period = 0;
  double corner = 0;  // transition radius r
  int periods = 0;
  bool flip = false;  // start with lam2 instead of -lam1

  // f, f', f'' at s (zero outside (k, l)).
  void eval(double s, double& f, double& fp, double& fpp) const;
  double second(double s) const;

  // Exact measure of {f'' not in {-lam1, lam2}} inside (k, l).
  double nonlevel_measure() const { return 4 * corner * (periods + 1); }
  // lam1 lam2 P / (2 (lam1 + lam2)), an upper bound for sup |f'|.
  double slope_bound() const;
  double sup_f() const { return sup_f_; }

  nlohmann::json to_json() const;
  static StaircaseProfile from_json(const nlohmann::json& j);

  // Builds the piece tables. Throws PreconditionError when the layout does
  // not fit (corner radius too large for the period or too many periods).
  static StaircaseProfile make(double lam1, double lam2, double k, double l, int periods,
                               double corner, bool flip);

 private:
  void build();
  void eval_left(double y, double& f, double& fp, double& fpp) const;
  std::vector<PolyPiece> first_, base_;
  double offset_ = 0;  // f at the end of the first period
  double sup_f_ = 0;
};

// Default construction: period tau min(1, lam1, lam2) / (4 (lam1 + lam2))
// unless given, rounded down so a whole number of periods fills (k, l);
// corner radius min(P/64, tau / (8 (N + 1))).
StaircaseProfile staircase_profile(double lam1, double lam2, double k, double l, double tau,
                                   std::optional<double> period = std::nullopt, bool flip = false);

}  // namespace cvxint
