#include "cvxint/convint.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cvxint/flux.hpp"
#include "cvxint/parallel.hpp"

namespace cvxint {

namespace {

double s5(double x) { return x * x * x * (10 - 15 * x + 6 * x * x); }
double s5d(double x) { return 30 * x * x * (1 - x) * (1 - x); }
double s5dd(double x) { return 60 * x * (1 - x) * (1 - 2 * x); }

double box_volume(const BoxDomain& b) {
  return b.volume() * (b.time_interval ? b.time_interval->length() : 1.0);
}

std::vector<double> sides(const BoxDomain& b) {
  std::vector<double> L;
  for (const auto& iv : b.intervals) L.push_back(iv.length());
  if (b.time_interval) L.push_back(b.time_interval->length());
  return L;
}

// Ramp width d so that the box minus its d-shrunk core has measure `lost`.
double ramp_for_volume(const BoxDomain& box, double lost) {
  auto L = sides(box);
  double V = 1;
  for (double x : L) V *= x;
  const double dmax = *std::min_element(L.begin(), L.end()) / 4;
  auto loss = [&](double d) {
    double core = 1;
    for (double x : L) core *= std::max(0.0, x - 2 * d);
    return V - core;
  };
  if (loss(dmax) <= lost) return dmax;
  double lo = 0, hi = dmax;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    (loss(mid) <= lost ? lo : hi) = mid;
  }
  return lo;
}

// Midpoint sample coordinates of sample `idx` on an m^(n+1) lattice.
void sample_point(const BoxDomain& box, int m, std::size_t idx, Vec& x, double& t) {
  const int n = box.dim();
  x.resize(n);
  for (int a = 0; a < n; ++a) {
    int i = static_cast<int>(idx % m);
    idx /= m;
    x(a) = box.intervals[a].a + (i + 0.5) * box.intervals[a].length() / m;
  }
  int k = static_cast<int>(idx % m);
  t = box.time_interval->a + (k + 0.5) * box.time_interval->length() / m;
}

std::size_t sample_count(int n, int m) {
  std::size_t c = 1;
  for (int a = 0; a <= n; ++a) c *= m;
  return c;
}

// Per-slice spatial integral of phi = q.Dh through the divergence theorem:
// sum_i q_i * (integral of h over the upper face minus the lower face).
double slice_mean_via_faces(const Patch& P, int m) {
  const int n = P.dim();
  const auto& box = P.box;
  double worst = 0;
  for (int k = 0; k < m; ++k) {
    double t = box.time_interval->a + (k + 0.5) * box.time_interval->length() / m;
    double total = 0;
    for (int i = 0; i < n; ++i) {
      if (P.frame.q(i) == 0) continue;
      std::size_t faces = 1;
      for (int a = 0; a < n - 1; ++a) faces *= m;
      double acc = 0, dA = 1;
      for (int a = 0; a < n; ++a)
        if (a != i) dA *= box.intervals[a].length() / m;
      for (std::size_t f = 0; f < faces; ++f) {
        Vec x(n);
        std::size_t r = f;
        for (int a = 0; a < n; ++a) {
          if (a == i) continue;
          int j = static_cast<int>(r % m);
          r /= m;
          x(a) = box.intervals[a].a + (j + 0.5) * box.intervals[a].length() / m;
        }
        x(i) = box.intervals[i].b;
        double hb = P.h_jet(x, t).h;
        x(i) = box.intervals[i].a;
        double ha = P.h_jet(x, t).h;
        acc += (hb - ha) * dA;
      }
      total += P.frame.q(i) * acc;
    }
    worst = std::max(worst, std::fabs(total));
  }
  return worst;
}

Vec json_vec(const nlohmann::json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  Vec r(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(i) = v[i];
  return r;
}

std::vector<double> vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json box_json(const BoxDomain& b) {
  nlohmann::json j;
  for (const auto& iv : b.intervals) j["space"].push_back({iv.a, iv.b});
  if (b.time_interval) j["time"] = {b.time_interval->a, b.time_interval->b};
  return j;
}

BoxDomain box_from_json(const nlohmann::json& j) {
  BoxDomain b;
  for (const auto& iv : j.at("space")) b.intervals.push_back({iv[0].get<double>(), iv[1].get<double>()});
  if (j.contains("time")) b.time_interval = Interval{j["time"][0].get<double>(), j["time"][1].get<double>()};
  return b;
}

void set_frame_b(RankOneFrame& f, double b) { f.b = b; }

}  // namespace

Mat OmegaJet::gradient() const {
  const auto n = dphi.size();
  Mat g(n + 1, n + 1);
  g.topLeftCorner(1, n) = dphi.transpose();
  g(0, n) = phi_t;
  g.bottomLeftCorner(n, n) = dpsi;
  g.bottomRightCorner(n, 1) = psi_t;
  return g;
}

OmegaJet p_operator(const HJet& h, const RankOneFrame& fr) {
  const auto n = fr.q.size();
  OmegaJet w;
  w.phi = fr.q.dot(h.dh);
  w.dphi = h.d2h * fr.q;
  w.phi_t = fr.q.dot(h.dht);
  if (fr.gamma.norm() == 0) {
    w.psi = Vec::Zero(n);
    w.dpsi = Mat::Zero(n, n);
    w.psi_t = Vec::Zero(n);
    return w;
  }
  Mat W = fr.gamma * fr.q.transpose() - fr.q * fr.gamma.transpose();
  w.psi = W * h.dh / fr.b;
  w.dpsi = W * h.d2h / fr.b;
  w.psi_t = W * h.dht / fr.b;
  return w;
}

void CutoffFactor::eval(double x, double& v, double& d1, double& d2) const {
  if (ramp <= 0) {
    v = 1;
    d1 = d2 = 0;
    return;
  }
  if (x <= a || x >= b) {
    v = d1 = d2 = 0;
    return;
  }
  if (x < a + ramp) {
    double y = (x - a) / ramp;
    v = s5(y);
    d1 = s5d(y) / ramp;
    d2 = s5dd(y) / (ramp * ramp);
  } else if (x > b - ramp) {
    double y = (b - x) / ramp;
    v = s5(y);
    d1 = -s5d(y) / ramp;
    d2 = s5dd(y) / (ramp * ramp);
  } else {
    v = 1;
    d1 = d2 = 0;
  }
}

double segment_distance(const Mat& g, const Mat& eta, double lam1, double lam2) {
  double s = (g.array() * eta.array()).sum() / eta.squaredNorm();
  s = std::clamp(s, -lam1, lam2);
  return (g - s * eta).norm();
}

double endpoint_distance(const Mat& g, const Mat& eta, double lam1, double lam2) {
  return std::min((g + lam1 * eta).norm(), (g - lam2 * eta).norm());
}

bool Patch::inside(const Vec& x, double t) const {
  if (empty) return false;
  for (int a = 0; a < dim(); ++a)
    if (!(x(a) > box.intervals[a].a && x(a) < box.intervals[a].b)) return false;
  return t > box.time_interval->a && t < box.time_interval->b;
}

HJet Patch::h_jet(const Vec& x, double t) const {
  const int n = dim();
  HJet j;
  j.dh = Vec::Zero(n);
  j.d2h = Mat::Zero(n, n);
  j.dht = Vec::Zero(n);
  if (empty) return j;
  double cv[kMaxDim], c1[kMaxDim], c2[kMaxDim];
  for (int a = 0; a < n; ++a) space[a].eval(x(a), cv[a], c1[a], c2[a]);
  double tv, t1, t2;
  time.eval(t, tv, t1, t2);
  double cs = 1;
  for (int a = 0; a < n; ++a) cs *= cv[a];
  if (cs == 0 || tv == 0) return j;
  const double b_eff = mode == PatchMode::aligned ? 0.0 : frame.b;
  const double s = frame.q.dot(x) + b_eff * t;
  double f, fp, fpp;
  profile.eval(s, f, fp, fpp);

  // Spatial product and its derivatives (cs != 0 here, but avoid dividing).
  Vec Dc(n);
  Mat D2c(n, n);
  for (int a = 0; a < n; ++a) {
    double p = c1[a];
    for (int o = 0; o < n; ++o)
      if (o != a) p *= cv[o];
    Dc(a) = p;
    for (int b2 = 0; b2 < n; ++b2) {
      double pp = 1;
      for (int o = 0; o < n; ++o) {
        if (o == a && o == b2)
          pp *= c2[o];
        else if (o == a || o == b2)
          pp *= c1[o];
        else
          pp *= cv[o];
      }
      D2c(a, b2) = pp;
    }
  }
  const double c = cs * tv, ct = cs * t1;
  const Vec Dct = Dc * t1;
  Dc *= tv;
  D2c *= tv;
  const Vec& q = frame.q;
  j.h = c * f;
  j.dh = f * Dc + c * fp * q;
  j.d2h = f * D2c + fp * (Dc * q.transpose() + q * Dc.transpose()) + c * fpp * q * q.transpose();
  j.ht = f * ct + c * fp * b_eff;
  j.dht = (fp * b_eff) * Dc + f * Dct + ct * fp * q + c * fpp * b_eff * q;
  return j;
}

OmegaJet Patch::eval(const Vec& x, double t) const { return p_operator(h_jet(x, t), frame); }

nlohmann::json frame_to_json(const RankOneFrame& f) {
  return {{"q", vec_json(f.q)},        {"gamma", vec_json(f.gamma)}, {"b", f.b},
          {"t_minus", f.t_minus},      {"t_plus", f.t_plus},         {"lam", f.lam}};
}

RankOneFrame frame_from_json(const nlohmann::json& j) {
  RankOneFrame f;
  f.q = json_vec(j.at("q"));
  f.gamma = json_vec(j.at("gamma"));
  f.b = j.at("b");
  f.t_minus = j.at("t_minus");
  f.t_plus = j.at("t_plus");
  f.lam = j.at("lam");
  return f;
}

nlohmann::json OscillationCertificates::to_json() const {
  return {{"div_psi", div_psi},
          {"nonlevel_measure", nonlevel_measure},
          {"max_segment_distance", max_segment_distance},
          {"sup_omega", sup_omega},
          {"max_slice_mean", max_slice_mean},
          {"passed", {{"a", a}, {"b", b}, {"c", c}, {"d", d}, {"e", e}}}};
}

nlohmann::json PatchCertificates::to_json() const {
  return {{"div_psi", div_psi},
          {"membership_failures", membership_failures},
          {"samples", samples},
          {"sup_omega", sup_omega},
          {"residual_integral", residual_integral},
          {"residual_budget", residual_budget},
          {"max_slice_mean", max_slice_mean},
          {"sup_phi_t", sup_phi_t},
          {"rho", rho},
          {"rho0", rho0},
          {"rho0_certified", rho0_certified},
          {"passed", {{"a", a}, {"b", b}, {"c", c}, {"d", d}, {"e", e}, {"f", f}}}};
}

nlohmann::json Patch::to_json() const {
  nlohmann::json j;
  j["mode"] = mode == PatchMode::aligned ? "aligned" : "analytic";
  j["empty"] = empty;
  j["box"] = box_json(box);
  if (empty) return j;
  j["frame"] = frame_to_json(frame);
  j["target"] = {{"p", vec_json(target.p)}, {"beta", vec_json(target.beta)}};
  j["delta"] = delta;
  j["tau_minus"] = tau_minus;
  j["tau_plus"] = tau_plus;
  j["lam1"] = lam1;
  j["lam2"] = lam2;
  j["profile"] = profile.to_json();
  j["axis"] = axis;
  for (const auto& c : space) j["space_cutoff"].push_back({c.a, c.b, c.ramp});
  j["time_cutoff"] = {time.a, time.b, time.ramp};
  j["retries"] = retries;
  j["oscillation_certificates"] = osc.to_json();
  j["patch_certificates"] = cert.to_json();
  return j;
}

Patch Patch::from_json(const nlohmann::json& j) {
  Patch P;
  P.mode = j.at("mode") == "aligned" ? PatchMode::aligned : PatchMode::analytic;
  P.empty = j.at("empty");
  P.box = box_from_json(j.at("box"));
  if (P.empty) return P;
  P.frame = frame_from_json(j.at("frame"));
  P.target = {json_vec(j["target"]["p"]), json_vec(j["target"]["beta"])};
  P.delta = j.at("delta");
  P.tau_minus = j.at("tau_minus");
  P.tau_plus = j.at("tau_plus");
  P.lam1 = j.at("lam1");
  P.lam2 = j.at("lam2");
  P.profile = StaircaseProfile::from_json(j.at("profile"));
  P.axis = j.at("axis");
  for (const auto& c : j.at("space_cutoff")) P.space.push_back({c[0], c[1], c[2]});
  const auto& tc = j.at("time_cutoff");
  P.time = {tc[0], tc[1], tc[2]};
  P.retries = j.value("retries", 0);
  return P;
}

namespace {

// Staircase over the s-range of the box, padded by one period on each side
// so the profile edges stay outside the box.
StaircaseProfile padded_profile(const RankOneFrame& fr, const BoxDomain& box, double lam1,
                                double lam2, double P, double max_nonlevel_fraction) {
  double smin = 0, smax = 0;
  for (int a = 0; a < box.dim(); ++a) {
    double u = fr.q(a) * box.intervals[a].a, v = fr.q(a) * box.intervals[a].b;
    smin += std::min(u, v);
    smax += std::max(u, v);
  }
  double u = fr.b * box.time_interval->a, v = fr.b * box.time_interval->b;
  smin += std::min(u, v);
  smax += std::max(u, v);
  double N = std::ceil((smax - smin) / P) + 2;
  if (N > 1e9) throw ConstructionError("patch period underflows the representable range");
  int Ni = static_cast<int>(N);
  double k = smin - P, l = k + Ni * P;
  double amin = P * std::min(lam1, lam2) / (lam1 + lam2);
  double r = std::min({P / 64, amin / 8, max_nonlevel_fraction * (l - k) / (4.0 * (Ni + 1))});
  return StaircaseProfile::make(lam1, lam2, k, l, Ni, r, false);
}

struct SampleStore {
  std::vector<double> dphi, psi_t;  // n per sample
};

}  // namespace

Patch build_oscillation(const OscillationSpec& spec, int samples) {
  const auto& fr = spec.frame;
  const int n = spec.box.dim();
  if (!spec.box.time_interval) throw PreconditionError("build_oscillation: box needs a time interval");
  spec.box.validate();
  if (fr.q.size() != n) throw PreconditionError("build_oscillation: frame dimension mismatch");
  if (!(spec.lam1 > 0 && spec.lam2 > 0 && spec.eps > 0))
    throw PreconditionError("build_oscillation: lam1, lam2, eps must be positive");
  if (fr.b == 0) throw PreconditionError("build_oscillation: b must be nonzero");

  const double V = box_volume(spec.box);
  const double d = ramp_for_volume(spec.box, 0.45 * std::min(spec.eps, V));
  const Mat eta = fr.eta();
  const double K = 1 + fr.gamma.norm() / std::fabs(fr.b);
  double A = spec.eps * std::min(d, 1.0) / (16 * K * (1 + eta.norm()) * (n + 1));

  Patch P;
  P.mode = PatchMode::analytic;
  P.frame = fr;
  P.lam1 = spec.lam1;
  P.lam2 = spec.lam2;
  P.box = spec.box;
  for (int a = 0; a < n; ++a) P.space.push_back({spec.box.intervals[a].a, spec.box.intervals[a].b, d});
  P.time = {spec.box.time_interval->a, spec.box.time_interval->b, d};

  const std::size_t S = sample_count(n, samples);
  const double tol = 1e-9 * std::max(1.0, eta.norm() * std::max(spec.lam1, spec.lam2));
  for (int attempt = 0; attempt <= 8; ++attempt) {
    double Pd = 2 * A * (spec.lam1 + spec.lam2) / (spec.lam1 * spec.lam2);
    P.profile = padded_profile(fr, spec.box, spec.lam1, spec.lam2, Pd, 0.05 * spec.eps / V);
    P.retries = attempt;
    std::vector<double> divp(S), dist(S), om(S);
    std::vector<char> off(S);
    parallel_for(S, [&](std::size_t i) {
      Vec x;
      double t;
      sample_point(spec.box, samples, i, x, t);
      OmegaJet w = P.eval(x, t);
      Mat g = w.gradient();
      divp[i] = std::fabs(w.dpsi.trace());
      dist[i] = segment_distance(g, eta, spec.lam1, spec.lam2);
      off[i] = endpoint_distance(g, eta, spec.lam1, spec.lam2) > tol;
      om[i] = std::sqrt(w.phi * w.phi + w.psi.squaredNorm());
    });
    auto& c = P.osc;
    c = {};
    long bad = 0;
    for (std::size_t i = 0; i < S; ++i) {
      c.div_psi = std::max(c.div_psi, divp[i]);
      c.max_segment_distance = std::max(c.max_segment_distance, dist[i]);
      c.sup_omega = std::max(c.sup_omega, om[i]);
      bad += off[i];
    }
    c.nonlevel_measure = V * static_cast<double>(bad) / S;
    c.max_slice_mean = slice_mean_via_faces(P, samples);
    c.a = c.div_psi <= 1e-8;
    c.b = c.nonlevel_measure < spec.eps;
    c.c = c.max_segment_distance < spec.eps;
    c.d = c.sup_omega < spec.eps;
    c.e = c.max_slice_mean <= 1e-10;
    if (c.passed()) return P;
    A *= 0.5;
  }
  std::ostringstream os;
  os << "build_oscillation: certificates failed after 8 retries:"
     << (P.osc.a ? "" : " (a)") << (P.osc.b ? "" : " (b)") << (P.osc.c ? "" : " (c)")
     << (P.osc.d ? "" : " (d)") << (P.osc.e ? "" : " (e)");
  throw ConstructionError(os.str());
}

Patch build_patch(const ReducedPoint& target, double delta, const BoxDomain& box, double rho,
                  double eps_budget, const BoxDomain& ambient, int samples, std::uint64_t seed) {
  Patch P;
  P.box = box;
  P.target = target;
  P.delta = delta;
  if (!box.time_interval) throw PreconditionError("build_patch: box needs a time interval");
  if (box_volume(box) <= 0) {
    P.empty = true;
    P.cert.a = P.cert.b = P.cert.c = P.cert.d = P.cert.e = P.cert.f = true;
    return P;
  }
  box.validate();
  const int n = box.dim();
  if (target.p.size() != n) throw PreconditionError("build_patch: target dimension mismatch");
  if (!(rho > 0 && eps_budget > 0)) throw PreconditionError("build_patch: rho and eps must be positive");
  if (!(s_delta_expression(target, delta) <= -1e-6))
    throw ConstructionError("build_patch: target margin too small (defining expression > -1e-6)");

  RankOneFrame fr = rank_one_decompose(target);
  const double span = fr.t_plus - fr.t_minus;
  set_frame_b(fr, std::min(default_b(fr.t_minus, fr.t_plus), 0.4 * rho / span));
  P.frame = fr;
  const double margin = s_delta_boundary_distance(target, delta);
  const double C_frame = span * fr.reduced_norm();
  double tau = std::min(0.2, margin / (4 * C_frame));

  const double V = box_volume(box);
  const double res0 = (target.beta - sigma(target.p)).norm();
  const double mean_budget = eps_budget / box_volume(ambient);
  const double lost = V * std::min(0.25, 0.45 * mean_budget / std::max(res0, 1e-12));
  const double d = ramp_for_volume(box, lost);
  for (int a = 0; a < n; ++a) P.space.push_back({box.intervals[a].a, box.intervals[a].b, d});
  P.time = {box.time_interval->a, box.time_interval->b, d};
  const double K = 1 + fr.gamma.norm() / std::fabs(fr.b);
  const std::size_t S = sample_count(n, samples);

  for (int attempt = 0; attempt <= 8; ++attempt) {
    P.retries = attempt;
    P.tau_minus = P.tau_plus = tau;
    P.lam1 = fr.lam * (1 - 2 * tau) * span;
    P.lam2 = (1 - fr.lam) * (1 - 2 * tau) * span;
    // S_delta margin along the shrunk segment.
    double seg_margin = 1e300;
    for (int i = 0; i <= 200; ++i) {
      double t = (1 - 2 * tau) * (fr.t_minus + (fr.t_plus - fr.t_minus) * i / 200.0);
      seg_margin = std::min(seg_margin, s_delta_boundary_distance(fr.endpoint(target, t), delta));
    }
    double A = std::min({rho / (4 * K), rho * d / (8 * 1.875), seg_margin * d / (16 * 1.875 * K * (n + 1))});
    double Pd = 2 * A * (P.lam1 + P.lam2) / (P.lam1 * P.lam2);
    Pd = std::min(Pd, tau * std::min({1.0, P.lam1, P.lam2}) / (4 * (P.lam1 + P.lam2)));
    P.profile = padded_profile(fr, box, P.lam1, P.lam2, Pd, 0.01 * mean_budget / std::max(res0, 1e-12));

    SampleStore st;
    st.dphi.assign(S * n, 0);
    st.psi_t.assign(S * n, 0);
    std::vector<double> divp(S), om(S), res(S), pt(S);
    std::vector<char> ok(S);
    parallel_for(S, [&](std::size_t i) {
      Vec x;
      double t;
      sample_point(box, samples, i, x, t);
      OmegaJet w = P.eval(x, t);
      for (int a = 0; a < n; ++a) {
        st.dphi[i * n + a] = w.dphi(a);
        st.psi_t[i * n + a] = w.psi_t(a);
      }
      ReducedPoint z{target.p + w.dphi, target.beta + w.psi_t};
      ok[i] = in_S_delta(z, delta);
      divp[i] = std::fabs(w.dpsi.trace());
      om[i] = std::sqrt(w.phi * w.phi + w.psi.squaredNorm());
      res[i] = (z.beta - sigma(z.p)).norm();
      pt[i] = std::fabs(w.phi_t);
    });
    auto& c = P.cert;
    c = {};
    c.samples = static_cast<long>(S);
    c.rho = rho;
    double racc = 0;
    for (std::size_t i = 0; i < S; ++i) {
      c.div_psi = std::max(c.div_psi, divp[i]);
      c.membership_failures += !ok[i];
      c.sup_omega = std::max(c.sup_omega, om[i]);
      c.sup_phi_t = std::max(c.sup_phi_t, pt[i]);
      racc += res[i];
    }
    c.residual_integral = V * racc / S;
    c.residual_budget = eps_budget * V / box_volume(ambient);
    c.max_slice_mean = slice_mean_via_faces(P, samples);
    c.a = c.div_psi <= 1e-8;
    c.b = c.membership_failures == 0;
    c.c = c.sup_omega < rho;
    c.d = c.residual_integral < c.residual_budget;
    c.e = c.max_slice_mean <= 1e-10;
    c.f = c.sup_phi_t < rho;
    if (c.passed()) {
      // Stability radius: half the segment margin, certified on 100 perturbed
      // base points over a strided subsample; halved on failure.
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> N01;
      const std::size_t stride = std::max<std::size_t>(1, S / 20000);
      c.rho0 = seg_margin / 2;
      for (int h = 0; h < 6 && !c.rho0_certified; ++h) {
        bool all = true;
        for (int trial = 0; trial < 100 && all; ++trial) {
          Vec dp(n), db(n);
          for (int a = 0; a < n; ++a) {
            dp(a) = N01(rng);
            db(a) = N01(rng);
          }
          double nrm = std::sqrt(dp.squaredNorm() + db.squaredNorm());
          dp *= c.rho0 / nrm;
          db *= c.rho0 / nrm;
          for (std::size_t i = 0; i < S && all; i += stride) {
            Vec p = target.p + dp, b = target.beta + db;
            for (int a = 0; a < n; ++a) {
              p(a) += st.dphi[i * n + a];
              b(a) += st.psi_t[i * n + a];
            }
            all = in_S_delta({p, b}, delta);
          }
        }
        if (all)
          c.rho0_certified = true;
        else
          c.rho0 *= 0.5;
      }
      return P;
    }
    tau *= 0.5;
  }
  std::ostringstream os;
  os << "build_patch: certificates failed after 8 retries:" << (P.cert.a ? "" : " (a)")
     << (P.cert.b ? "" : " (b)") << (P.cert.c ? "" : " (c)") << (P.cert.d ? "" : " (d)")
     << (P.cert.e ? "" : " (e)") << (P.cert.f ? "" : " (f)");
  throw ConstructionError(os.str());
}

Patch make_aligned_patch(const ReducedPoint& target, double delta, const RankOneFrame& frame,
                         const BoxDomain& box, const AlignedPatchParams& prm) {
  const int n = box.dim();
  if (!box.time_interval) throw PreconditionError("make_aligned_patch: box needs a time interval");
  if (frame.gamma.norm() > 1e-12) throw PreconditionError("make_aligned_patch: needs gamma = 0");
  if (prm.axis < 0 || prm.axis >= n || std::fabs(std::fabs(frame.q(prm.axis)) - 1) > 1e-12)
    throw PreconditionError("make_aligned_patch: q must be a coordinate direction");
  Patch P;
  P.mode = PatchMode::aligned;
  P.frame = frame;
  P.target = target;
  P.delta = delta;
  P.box = box;
  P.axis = prm.axis;
  P.tau_minus = prm.tau_minus;
  P.tau_plus = prm.tau_plus;
  P.lam1 = -(1 - 2 * prm.tau_minus) * frame.t_minus;
  P.lam2 = (1 - 2 * prm.tau_plus) * frame.t_plus;
  const auto& iv = box.intervals[prm.axis];
  const double qa = frame.q(prm.axis);
  const double k = std::min(qa * iv.a, qa * iv.b), l = std::max(qa * iv.a, qa * iv.b);
  const double Pd = (l - k) / prm.periods;
  const double amin = Pd * std::min(P.lam1, P.lam2) / (P.lam1 + P.lam2);
  P.profile = StaircaseProfile::make(P.lam1, P.lam2, k, l, prm.periods, std::min(Pd / 64, amin / 8),
                                     prm.flip);
  for (int a = 0; a < n; ++a) {
    double ramp = a == prm.axis ? 0.0 : prm.transverse_ramp * box.intervals[a].length();
    P.space.push_back({box.intervals[a].a, box.intervals[a].b, ramp});
  }
  P.time = {box.time_interval->a, box.time_interval->b, prm.time_ramp * box.time_interval->length()};
  return P;
}

}  // namespace cvxint
