#pragma once

#include <cstdint>
#include <json.hpp>
#include <vector>

#include "cvxint/grid.hpp"
#include "cvxint/hull.hpp"
#include "cvxint/staircase.hpp"

namespace cvxint {

// Second-order jet of a scalar potential h(x, t).
struct HJet {
  double h = 0;
  Vec dh;
  Mat d2h;
  double ht = 0;
  Vec dht;
};

// w = (phi, psi) and its space-time derivatives.
struct OmegaJet {
  double phi = 0;
  Vec psi;
  Vec dphi;
  double phi_t = 0;
  Mat dpsi;
  Vec psi_t;

  // (n+1)x(n+1): rows (phi, psi_1..psi_n), columns (x_1..x_n, t).
  Mat gradient() const;
};

// phi = q.Dh, psi = (1/b)(gamma (x) q - q (x) gamma) Dh. psi is set to zero
// when gamma vanishes, whatever b is.
OmegaJet p_operator(const HJet& h, const RankOneFrame& frame);

// 1D smoothstep cutoff on [a, b]: 0 outside, S5 ramps of width `ramp`, 1
// inside. ramp = 0 means the factor is identically 1.
struct CutoffFactor {
  double a = 0, b = 1, ramp = 0;
  void eval(double x, double& v, double& d1, double& d2) const;
};

enum class PatchMode {
  analytic,  // h = c(x,t) f(q.x + b t) with a full tensor cutoff
  aligned,   // q along a coordinate axis, gamma = 0: f fits the box exactly along q
};

struct OscillationSpec {
  RankOneFrame frame;
  double lam1 = 0, lam2 = 0;
  BoxDomain box;  // spatial intervals plus time_interval
  double eps = 0;
};

struct OscillationCertificates {
  double div_psi = 0;               // (a) max |tr D psi|
  double nonlevel_measure = 0;      // (b) sampled |{grad w not in {eta1, eta2}}|
  double max_segment_distance = 0;  // (c)
  double sup_omega = 0;             // (d)
  double max_slice_mean = 0;        // (e)
  bool a = false, b = false, c = false, d = false, e = false;
  bool passed() const { return a && b && c && d && e; }
  nlohmann::json to_json() const;
};

struct PatchCertificates {
  double div_psi = 0;                // (a)
  long membership_failures = 0;      // (b)
  long samples = 0;
  double sup_omega = 0;              // (c)
  double residual_integral = 0;      // (d)
  double residual_budget = 0;
  double max_slice_mean = 0;         // (e)
  double sup_phi_t = 0;              // (f)
  double rho = 0;
  double rho0 = 0;
  bool rho0_certified = false;
  bool a = false, b = false, c = false, d = false, e = false, f = false;
  bool passed() const { return a && b && c && d && e && f; }
  nlohmann::json to_json() const;
};

struct Patch {
  PatchMode mode = PatchMode::analytic;
  bool empty = false;
  RankOneFrame frame;
  ReducedPoint target;
  double delta = 0;
  double tau_minus = 0, tau_plus = 0;
  double lam1 = 0, lam2 = 0;
  StaircaseProfile profile;
  int axis = -1;  // aligned mode only
  std::vector<CutoffFactor> space;
  CutoffFactor time;
  BoxDomain box;
  int retries = 0;
  OscillationCertificates osc;
  PatchCertificates cert;

  int dim() const { return box.dim(); }
  bool inside(const Vec& x, double t) const;  // open support box
  HJet h_jet(const Vec& x, double t) const;
  OmegaJet eval(const Vec& x, double t) const;

  nlohmann::json to_json() const;
  static Patch from_json(const nlohmann::json& j);
};

// Bare oscillation with measured certificates on a samples^(n+1)
// midpoint sampling. Retries with a halved amplitude (at most 8 times).
Patch build_oscillation(const OscillationSpec& spec, int samples = 64);

// Full patch toward a target in S_delta. Shrinks the rank-one endpoints by
// tau, starting at margin/(4 C_frame) and halving on certificate failure.
Patch build_patch(const ReducedPoint& target, double delta, const BoxDomain& box, double rho,
                  double eps_budget, const BoxDomain& ambient, int samples = 64,
                  std::uint64_t seed = 5);

struct AlignedPatchParams {
  double tau_minus = 0.05, tau_plus = 0.05;
  int axis = 0;
  int periods = 1;
  bool flip = false;
  double time_ramp = 0.1;        // fraction of the time extent on each side
  double transverse_ramp = 0.25;  // fraction of each transverse side
};

// Grid patch used by the stitcher: requires gamma = 0 and q = +-e_axis.
// Certificates are left to the caller, which measures on grid nodes.
Patch make_aligned_patch(const ReducedPoint& target, double delta, const RankOneFrame& frame,
                         const BoxDomain& box, const AlignedPatchParams& prm);

// Distance from a gradient matrix to the segment [eta1, eta2] and to its
// two endpoints.
double segment_distance(const Mat& g, const Mat& eta, double lam1, double lam2);
double endpoint_distance(const Mat& g, const Mat& eta, double lam1, double lam2);

nlohmann::json frame_to_json(const RankOneFrame& f);
RankOneFrame frame_from_json(const nlohmann::json& j);

}  // namespace cvxint
