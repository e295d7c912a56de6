#pragma once

#include <cstdint>
#include <vector>

#include "cvxint/grid.hpp"

namespace cvxint {

// Polynomial bump c (s-a)^4 (b-s)^4 sampled on a node grid and rescaled so
// that its trapezoid integral is exactly one.
struct BumpProfile {
  Interval interval;
  std::vector<double> values;
  std::vector<double> cumulative;  // trapezoid antiderivative from a

  static BumpProfile make(const Interval& iv, int nodes);
  static constexpr double C0 = 630.0 / 256.0;  // sup of the unit-integral bump times (b-a)
};

// R_n applied to a single slice; returns n components per node. Axis 0 is
// peeled first (it plays the role of the last coordinate in the recursion).
VectorField right_inverse_static(const ScalarField& u_slice);

struct SpacetimeInverse {
  VectorField v;
  bool mean_warning = false;
  double max_slice_mean = 0;
};

// Slice-wise R over all time levels of u.
SpacetimeInverse right_inverse_spacetime(const ScalarField& u);

// Same map on raw slice data, used by the stitcher on cube sub-grids.
void right_inverse_slice(const GridSpec& g, const double* u, double* v_out);

// Max over nodes of |div_h v - u| using central interior and first-order
// one-sided boundary differences.
double divergence_defect(const VectorField& v, const ScalarField& u);

struct InverseConstant {
  double constant = 0;             // running supremum after all trials
  std::vector<double> history;     // running supremum after each trial
};

// Empirical sup of ||R u|| / ((sum |J_i|) ||u||) over random smooth inputs.
InverseConstant measure_inverse_constant(const BoxDomain& domain, int trials,
                                         std::uint64_t seed = 11, int nx = 65);

// Random smooth test input of the family used by measure_inverse_constant.
ScalarField random_smooth_input(const GridSpec& g, std::uint64_t seed);

// Fixed smooth inputs with unit sup norm, none of them Neumann-compatible,
// so the one-sided boundary stencil sets a first-order error: which = 0
// (sin 3y0) y1^2 + 1/2, 1 exp(sum y) - 1, 2 sin(2 y0 + y1) + y0 y1
// (rescaled), in normalized coordinates.
ScalarField smooth_test_input(const GridSpec& g, int which);

}  // namespace cvxint
