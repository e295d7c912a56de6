#pragma once

#include <array>
#include <cstdint>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "cvxint/convint.hpp"
#include "cvxint/flux.hpp"
#include "cvxint/parabolic.hpp"

namespace cvxint {

// Index box on the space-time grid: lo/hi node indices per spatial axis,
// then time. The patch lives on the open box; its closure nodes are untouched.
struct IndexBox {
  std::array<int, kMaxDim + 1> lo{}, hi{};
  int dim = 1;  // spatial dimension
  long volume_cells() const;
  bool interiors_overlap(const IndexBox& o) const;
  nlohmann::json to_json() const;
};

struct CubeRecord {
  IndexBox cube;
  Patch patch;
  double residual_before = 0, residual_after = 0;  // contributions to the normalized residual
  double oscillation = 0;     // max spread of (Du, v_t) over the cube nodes before patching
  double rho0 = 0;            // half the S_delta margin of the shrunk segment
  double sup_omega = 0;       // max |(phi, psi + g)|
  double sup_phi_t = 0;
  double g_t_max = 0;         // divergence correction size in v_t
  bool literal = false;       // proof budgets (oscillation, rho) held, not just the measurements
  int step = 0;
  nlohmann::json to_json() const;
};

struct StitchOptions {
  double kappa = 0.5;          // working target = min(eps, kappa * residual at entry)
  double classify_tau = 1e-3;  // threshold of the good set G_tau
  std::vector<int> space_sides = {64, 32, 16, 8, 5};
  std::vector<int> time_sides = {128, 64, 32, 16, 8};
  int min_period_cells = 5;
  std::vector<double> taus = {0.005, 0.01, 0.02, 0.05, 0.1, 0.2};
  double time_ramp = 0.1;
  double transverse_ramp = 0.25;
  double min_gain = 0.05;          // accept a cube only if it removes this fraction of its residual
  double inverse_constant = 0;     // divinv constant; 0 measures it
  std::uint64_t seed = 1;
  nlohmann::json to_json() const;
};

struct AdmissiblePair {
  std::shared_ptr<const BoundaryDatum> datum;
  GridSpec grid;
  double delta = 0, m_minus = 0, mu = 0;
  ScalarField u, ut;
  VectorField v, du, vt;
  std::vector<char> owned;  // nodes strictly inside a patched cube
  std::vector<CubeRecord> patches;
};

AdmissiblePair initial_pair(std::shared_ptr<const BoundaryDatum> datum, const FluxProfile& prof);

// Trapezoid integral of |v_t - sigma(Du)| over interior nodes divided by |Omega_T|.
double residual(const AdmissiblePair& pair);

struct AdmissibilityReport {
  double trace_deviation = 0;  // max |u - u*|, |v - v*| over boundary nodes of Omega_T
  double div_defect = 0;       // max interior |div v - u|
  double ut_max = 0;
  bool ut_ok = false;          // ut_max < mu
  double membership_fraction = 0;
  double max_grad = 0;
  bool ok = false;             // trace exact, ut_ok, membership >= 99%
  nlohmann::json to_json() const;
};

AdmissibilityReport check_admissible(const AdmissiblePair& pair);

struct CubeCover {
  std::vector<IndexBox> cubes;  // disjoint, largest first
  long interior_nodes = 0, good_nodes = 0;
  double good_residual = 0, bad_residual = 0;  // normalized residual on and off the good set
  double nu = 0;  // continuity scale: largest cube diameter with oscillation below the bound
  nlohmann::json to_json() const;
};

CubeCover classify_cells(const AdmissiblePair& pair, double tau, double eps,
                         const StitchOptions& opt = {});

struct StepReport {
  int step = 0;
  double eps = 0, eta = 0, eps_work = 0;
  std::string status;  // "ok", "noop", "stalled"
  std::string message;
  double residual_in = 0, residual_out = 0;
  long candidates = 0, accepted = 0, literal = 0, unaligned = 0;
  double I1 = 0, I2 = 0, I3 = 0;
  bool audit_ok = false;
  double sup_change = 0;  // ||u_new - u||
  double tau0 = 0, rho_literal = 0, nu = 0;
  AdmissibilityReport admissible;
  bool contract_ok = false;  // residual <= eps, sup change < eta, admissible, traces exact
  nlohmann::json to_json() const;
};

AdmissiblePair density_step(const AdmissiblePair& pair, double eps, double eta,
                            const StitchOptions& opt, StepReport* report);

struct ScheduleEntry {
  double eps, eta;
};

// Chained density steps; stops early (returning the partial sequence) when a
// step cannot make progress and its contract fails.
std::vector<AdmissiblePair> iterate(std::shared_ptr<const BoundaryDatum> datum,
                                    const FluxProfile& prof,
                                    const std::vector<ScheduleEntry>& schedule,
                                    const StitchOptions& opt, std::vector<StepReport>* reports);

}  // namespace cvxint
