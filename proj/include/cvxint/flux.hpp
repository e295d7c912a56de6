#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cvxint/common.hpp"

namespace cvxint {

// rho(s) = s/(1+s^2), the radial Perona-Malik profile.
double rho(double s);
double rho_prime(double s);
double rho_second(double s);

// sigma(p) = p/(1+|p|^2).
Vec sigma(const Vec& p);
Mat sigma_jacobian(const Vec& p);

struct MBounds {
  double m_minus;
  double m_plus;
};

// Roots of rho(m) = delta; throws std::domain_error outside (0, 1/2).
MBounds m_bounds(double delta);

// Degree-7 smoothstep and its decreasing complement used by the blend.
double smoothstep7(double x);
double smoothstep7_prime(double x);

class FluxProfile {
 public:
  double delta = 0, Lambda = 0, theta = 0, Theta = 1, blend_width = 0;
  int dim = 1;
  double m_minus = 0, m_plus = 0;

  // rho* and its first two derivatives, s >= 0.
  double rho_star(double s) const;
  double rho_star_prime(double s) const;
  double rho_star_second(double s) const;

  // f(s) = rho*(sqrt s)/sqrt s, so that A(p) = f(|p|^2) p.
  double f(double s) const;
  double f_prime(double s) const;

  // Knot table over the blend interval [m_minus, m_minus + blend_width].
  const std::vector<double>& knot_values() const { return knot_val_; }
  double knot_spacing() const { return knot_h_; }

  nlohmann::json to_json() const;
  static FluxProfile from_json(const nlohmann::json& j);

  // Builds the knot table; does not validate.
  static FluxProfile make(double delta, double Lambda, double theta, double blend_width,
                          int dim);

 private:
  double g(double s) const;        // (rho*)'
  double g_prime(double s) const;  // (rho*)''
  std::vector<double> knot_val_;
  double knot_h_ = 0;
  double tail_value_ = 0;  // rho*(m_minus + blend_width)
};

struct ProfileCheck {
  bool ok = true;
  std::string failure;
  double min_slope = 0, max_slope = 0;        // over [0, 2 m_plus]
  double min_secant = 0, max_secant = 0;      // rho*(r)/r
  double max_undercut_violation = 0;          // max of rho* - rho on (m_minus, Lambda]
  double max_identity_gap = 0;                // max |rho* - rho| on [0, m_minus]
};

ProfileCheck validate_profile(const FluxProfile& prof, int samples = 20000);

// delta chosen from M and the slack: 0.9 M / (1 + M^2) below M = 1, otherwise
// s / (1 + s^2) with s = M + lambda_slack.
double selected_delta(double M, double lambda_slack);

// Selection rules for delta, Lambda from M and the slack; retries with a
// halved blend width on validation failure (at most 16 retries). Large M
// needs a narrow blend since rho(Lambda) - delta shrinks like 1/M^2.
FluxProfile build_profile(double M, double lambda_slack, int dim = 1,
                          std::optional<double> blend_width = std::nullopt);

Vec A_flux(const FluxProfile& prof, const Vec& p);
Mat A_jacobian(const FluxProfile& prof, const Vec& p);

}  // namespace cvxint
