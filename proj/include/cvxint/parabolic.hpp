#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "cvxint/flux.hpp"
#include "cvxint/grid.hpp"

namespace cvxint {

struct StepDiagnostics {
  double t = 0;
  double mass = 0;
  double max_grad = 0;
  double membership_fraction = 1;
};

struct SolveOptions {
  int substeps = 0;      // explicit Euler substeps per output interval; 0 picks the stable count
  double safety = 0.9;   // fraction of the stability limit used when picking
};

// Largest stable explicit step h^2 / (2 n Theta).
double stable_dt(const GridSpec& g, double Theta);

// Conservative explicit flux-form solver for u_t = div A(Du) with Neumann
// data. The mean of u0 is removed first.
ScalarField solve_regularized(const ScalarField& u0, const FluxProfile& prof, const GridSpec& grid,
                              std::vector<StepDiagnostics>* diag = nullptr,
                              const SolveOptions& opt = {});

struct MaxPrincipleReport {
  double ratio = 0;              // max over t of ||Du(t)|| / ||Du0||
  std::vector<double> ratios;    // per time level
  bool nonincreasing = true;     // observation only
  bool passed = true;            // ratio <= 1 + 10 h
  double h = 0;
};

MaxPrincipleReport check_gradient_max_principle(const ScalarField& u_star);

// Max over nodes of the reflected-gradient norm on one time level.
double max_gradient(const ScalarField& u, int k);

// Fourth-order Neumann Laplacian with even reflection, used by the Poisson
// solve and its residual check.
void neumann_laplacian(const GridSpec& g, const double* u, double* out);

struct PoissonResult {
  ScalarField h;
  int iterations = 0;
  double residual = 0;  // max |L h - u0|
};

PoissonResult solve_neumann_poisson(const ScalarField& u0_slice, double tol = 1e-10);

// Fourth-order gradient with even reflection (normal component vanishes).
Vec neumann_gradient4(const GridSpec& g, const double* u, std::size_t s);

struct BoundaryDatum {
  ScalarField u_star;
  VectorField v_star;
  VectorField v_star_t;  // A(Du*) at nodes
  double M = 0;
  double mu = 0;
  double div_defect = 0;           // max |div v* - u*| (reflected stencil)
  double normal_trace = 0;         // max normal component of v* on the boundary
  double grad_ratio = 0;           // max ||Du*(t)|| / M
  double violating_fraction = 0;   // interior nodes outside S_delta u K_delta
  long s_delta_nodes = 0, k_delta_nodes = 0, violating_nodes = 0;
  std::vector<StepDiagnostics> diagnostics;
};

BoundaryDatum build_boundary_datum(const ScalarField& u0_slice, const FluxProfile& prof,
                                   const GridSpec& grid, const SolveOptions& opt = {});

// Membership of a node value (p, beta) in S_delta or K_delta within tol.
enum class Membership { k_delta, s_delta, none };
Membership classify_membership(const Vec& p, const Vec& beta, double delta, double m_minus,
                               double tol = 1e-8);

// Initial data catalog: {"name": "cosine"|"cosine_product"|"gaussian"|"zero", ...}.
ScalarField sample_initial_datum(const nlohmann::json& entry, const GridSpec& g);

std::string diagnostics_csv(const std::vector<StepDiagnostics>& d);

}  // namespace cvxint
