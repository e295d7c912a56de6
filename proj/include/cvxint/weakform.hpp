#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "cvxint/stitcher.hpp"

namespace cvxint {

// Smooth test function on the box, written in normalized coordinates
// y = (x - a) / L and tau = t / T.
struct TestFunction {
  enum class Kind { constant, cosine, cosine_product, polynomial };
  Kind kind = Kind::constant;
  int axis = 0, mode = 1;
  double time_slope = 0;  // factor (1 + time_slope * tau)
  std::string name;

  void eval(const GridSpec& g, const Vec& x, double t, double& z, Vec& dz, double& zt) const;
};

std::vector<TestFunction> test_catalog(int dim);

struct WeakFormReport {
  std::vector<double> times;
  double max_residual = 0;
  std::string worst;
  double identity_max = 0;  // max |int v.Dzeta + int u zeta| over sampled times
  double max_grad_zeta = 0;
  double pair_residual = 0;
  double bound = 0;        // pair_residual * max|Dzeta| + 1e-4
  double bound_tight = 0;  // same with the |Omega_T| factor the normalization drops
  bool within_bound = false;
  nlohmann::json rows;
  nlohmann::json to_json() const;
};

// Left minus right side of the weak formulation at s in {T/4, T/2, T}
// (nearest grid level), maximized over the catalog.
WeakFormReport weak_form_residual(const AdmissiblePair& pair,
                                  const std::vector<TestFunction>& catalog);

// Pair whose datum never leaves the region where the modified flux equals
// sigma, so v_t = sigma(Du) holds exactly at every node.
AdmissiblePair synthetic_exact_pair(int nx, int nt, double T = 0.25);

}  // namespace cvxint
