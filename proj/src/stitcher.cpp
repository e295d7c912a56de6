#include "cvxint/stitcher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cvxint/divinv.hpp"
#include "cvxint/hull.hpp"
#include "cvxint/parallel.hpp"

namespace cvxint {

using nlohmann::json;

long IndexBox::volume_cells() const {
  long v = 1;
  for (int a = 0; a <= dim; ++a) v *= hi[a] - lo[a];
  return v;
}

bool IndexBox::interiors_overlap(const IndexBox& o) const {
  for (int a = 0; a <= dim; ++a)
    if (hi[a] <= o.lo[a] || o.hi[a] <= lo[a]) return false;
  return true;
}

json IndexBox::to_json() const {
  json l = json::array(), h = json::array();
  for (int a = 0; a <= dim; ++a) {
    l.push_back(lo[a]);
    h.push_back(hi[a]);
  }
  return {{"lo", l}, {"hi", h}};
}

json CubeRecord::to_json() const {
  return {{"cube", cube.to_json()},
          {"step", step},
          {"residual_before", residual_before},
          {"residual_after", residual_after},
          {"oscillation", oscillation},
          {"rho0", rho0},
          {"sup_omega", sup_omega},
          {"sup_phi_t", sup_phi_t},
          {"g_t_max", g_t_max},
          {"literal", literal},
          {"patch", patch.to_json()}};
}

json StitchOptions::to_json() const {
  return {{"kappa", kappa},
          {"classify_tau", classify_tau},
          {"space_sides", space_sides},
          {"time_sides", time_sides},
          {"min_period_cells", min_period_cells},
          {"taus", taus},
          {"time_ramp", time_ramp},
          {"transverse_ramp", transverse_ramp},
          {"min_gain", min_gain},
          {"inverse_constant", inverse_constant},
          {"seed", seed}};
}

json AdmissibilityReport::to_json() const {
  return {{"trace_deviation", trace_deviation}, {"div_defect", div_defect},
          {"ut_max", ut_max},                   {"ut_ok", ut_ok},
          {"membership_fraction", membership_fraction},
          {"max_grad", max_grad},               {"ok", ok}};
}

json CubeCover::to_json() const {
  json c = json::array();
  for (const auto& b : cubes) c.push_back(b.to_json());
  return {{"cubes", c},
          {"interior_nodes", interior_nodes},
          {"good_nodes", good_nodes},
          {"good_residual", good_residual},
          {"bad_residual", bad_residual},
          {"nu", nu}};
}

json StepReport::to_json() const {
  return {{"step", step},
          {"eps", eps},
          {"eta", eta},
          {"eps_work", eps_work},
          {"status", status},
          {"message", message},
          {"residual_in", residual_in},
          {"residual_out", residual_out},
          {"candidates", candidates},
          {"accepted", accepted},
          {"literal", literal},
          {"unaligned", unaligned},
          {"I1", I1},
          {"I2", I2},
          {"I3", I3},
          {"audit_ok", audit_ok},
          {"sup_change", sup_change},
          {"tau0", tau0},
          {"rho_literal", rho_literal},
          {"nu", nu},
          {"admissible", admissible.to_json()},
          {"contract_ok", contract_ok}};
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> time_weights(const GridSpec& g) {
  std::vector<double> w(g.nt, g.dt());
  if (g.nt > 1) w.front() = w.back() = 0.5 * g.dt();
  return w;
}

double omega_T(const GridSpec& g) { return g.box.volume() * g.T; }

double node_residual(const AdmissiblePair& P, int k, std::size_t s) {
  return (P.vt.get(k, s) - sigma(P.du.get(k, s))).norm();
}

bool member(const AdmissiblePair& P, const Vec& p, const Vec& b) {
  return classify_membership(p, b, P.delta, P.m_minus) != Membership::none;
}

// Visits the nodes of a box (open interior or closure) as (multi-index, k).
template <class F>
void for_each_node(const IndexBox& b, bool interior, F&& fn) {
  const int n = b.dim;
  std::array<int, kMaxDim + 1> lo{}, hi{};
  for (int a = 0; a <= n; ++a) {
    lo[a] = b.lo[a] + (interior ? 1 : 0);
    hi[a] = b.hi[a] - (interior ? 1 : 0);
    if (lo[a] > hi[a]) return;
  }
  std::array<int, kMaxDim + 1> idx = lo;
  while (true) {
    fn(idx.data(), idx[n]);
    int a = 0;
    while (a <= n) {
      if (++idx[a] <= hi[a]) break;
      idx[a] = lo[a];
      ++a;
    }
    if (a > n) return;
  }
}

// Largest componentwise spread of (Du, v_t) over the closure of a box.
double spread(const AdmissiblePair& P, const IndexBox& b) {
  const int n = P.grid.dim();
  std::vector<double> mn(2 * n, 1e300), mx(2 * n, -1e300);
  for_each_node(b, false, [&](const int* idx, int k) {
    std::size_t s = P.grid.flat(idx);
    for (int c = 0; c < n; ++c) {
      double a = P.du.at(k, s, c), v = P.vt.at(k, s, c);
      mn[c] = std::min(mn[c], a);
      mx[c] = std::max(mx[c], a);
      mn[n + c] = std::min(mn[n + c], v);
      mx[n + c] = std::max(mx[n + c], v);
    }
  });
  double acc = 0;
  for (int c = 0; c < 2 * n; ++c) acc += (mx[c] - mn[c]) * (mx[c] - mn[c]);
  return std::sqrt(acc);
}

bool interior_node(const GridSpec& g, int k, std::size_t s) {
  return !g.on_boundary(s) && k > 0 && k < g.nt - 1;
}

std::vector<char> good_mask(const AdmissiblePair& P, double tau) {
  const GridSpec& g = P.grid;
  const std::size_t N = g.spatial_size();
  std::vector<char> good(g.size(), 0);
  parallel_for(g.size(), [&](std::size_t i) {
    int k = static_cast<int>(i / N);
    std::size_t s = i % N;
    if (!interior_node(g, k, s) || P.owned[i]) return;
    ReducedPoint z{P.du.get(k, s), P.vt.get(k, s)};
    if (!in_S_delta(z, P.delta)) return;
    good[i] = s_delta_boundary_distance(z, P.delta) > tau;
  });
  return good;
}

// Physical box of an index box.
BoxDomain physical_box(const GridSpec& g, const IndexBox& b) {
  BoxDomain d;
  for (int a = 0; a < b.dim; ++a) d.intervals.push_back({g.x(a, b.lo[a]), g.x(a, b.hi[a])});
  d.time_interval = Interval{g.t(b.lo[b.dim]), g.t(b.hi[b.dim])};
  return d;
}

// Node data of a candidate cube, cached for the parameter search.
struct CubeNode {
  int ia = 0, kk = 0;  // offsets along the patch axis and time from the box lo
  std::size_t flat = 0;
  double C = 1;
  Vec gradC;
  Vec du, vt;
  double ut = 0, w = 0, res = 0;
};

struct Candidate {
  IndexBox box;
  ReducedPoint target;
  RankOneFrame frame;
  int axis = -1;
  bool flip = false;
  bool unaligned = false, viable = false;
  double before = 0, after = 0;
  AlignedPatchParams prm;
};

// Sets a round-off gamma to zero and re-solves q.sigma(p + t q) = q.beta for
// both endpoints by Newton from the decomposition's values.
void snap_gamma(RankOneFrame& f, const ReducedPoint& z) {
  f.gamma.setZero();
  const double target = f.q.dot(z.beta);
  for (double* t : {&f.t_minus, &f.t_plus})
    for (int it = 0; it < 30; ++it) {
      Vec p = z.p + *t * f.q;
      double r = f.q.dot(sigma(p)) - target;
      double d = f.q.dot(sigma_jacobian(p) * f.q);
      if (d == 0) break;
      *t -= r / d;
      if (std::fabs(r) < 1e-15) break;
    }
}

class StepSearch {
 public:
  StepSearch(const AdmissiblePair& P, const StitchOptions& opt, double ut_cap, double eta)
      : P_(P), opt_(opt), cap_(ut_cap), eta_(eta), wt_(time_weights(P.grid)) {}

  void evaluate(Candidate& c) const {
    const GridSpec& g = P_.grid;
    const int n = g.dim();
    const IndexBox& b = c.box;
    std::array<int, kMaxDim + 1> mid{};
    for (int a = 0; a <= n; ++a) mid[a] = (b.lo[a] + b.hi[a]) / 2;
    std::size_t sc = g.flat(mid.data());
    c.target = {P_.du.get(mid[n], sc), P_.vt.get(mid[n], sc)};
    if (!in_S_delta(c.target, P_.delta)) return;
    try {
      c.frame = rank_one_decompose(c.target);
    } catch (const std::exception&) {
      return;
    }
    int axis = -1;
    for (int a = 0; a < n; ++a)
      if (std::fabs(std::fabs(c.frame.q(a)) - 1) < 1e-9) axis = a;
    if (axis >= 0 && c.frame.gamma.norm() < 1e-6) snap_gamma(c.frame, c.target);
    if (axis < 0 || c.frame.gamma.norm() > 0) {
      c.unaligned = true;
      return;
    }
    c.axis = axis;
    std::uint64_t key = opt_.seed;
    for (int a = 0; a <= n; ++a) key = splitmix(key ^ static_cast<std::uint64_t>(b.lo[a] + 7919 * a));
    c.flip = key & 1;

    const BoxDomain phys = physical_box(g, b);
    const double norm = 1.0 / omega_T(g);
    // Transverse cutoff and time factor do not depend on the search parameters.
    AlignedPatchParams base;
    base.axis = axis;
    base.flip = c.flip;
    base.time_ramp = opt_.time_ramp;
    base.transverse_ramp = opt_.transverse_ramp;
    std::vector<CutoffFactor> space;
    for (int a = 0; a < n; ++a)
      space.push_back({phys.intervals[a].a, phys.intervals[a].b,
                       a == axis ? 0.0 : opt_.transverse_ramp * phys.intervals[a].length()});
    CutoffFactor time{phys.time_interval->a, phys.time_interval->b,
                      opt_.time_ramp * phys.time_interval->length()};
    const int st = b.hi[n] - b.lo[n];
    std::vector<double> Tk(st + 1), Tp(st + 1);
    for (int k = 0; k <= st; ++k) {
      double d2;
      time.eval(g.t(b.lo[n] + k), Tk[k], Tp[k], d2);
    }
    std::vector<CubeNode> nodes;
    c.before = 0;
    for_each_node(b, true, [&](const int* idx, int k) {
      CubeNode nd;
      nd.flat = g.flat(idx);
      nd.ia = idx[axis] - b.lo[axis];
      nd.kk = k - b.lo[n];
      nd.gradC = Vec::Zero(n);
      std::array<double, kMaxDim> cv{}, cd{};
      for (int a = 0; a < n; ++a) {
        double d2;
        space[a].eval(g.x(a, idx[a]), cv[a], cd[a], d2);
      }
      nd.C = 1;
      for (int a = 0; a < n; ++a) nd.C *= cv[a];
      for (int o = 0; o < n; ++o) {
        if (o == axis) continue;
        double v = cd[o];
        for (int a = 0; a < n; ++a)
          if (a != o) v *= cv[a];
        nd.gradC(o) = v;
      }
      nd.du = P_.du.get(k, nd.flat);
      nd.vt = P_.vt.get(k, nd.flat);
      nd.ut = P_.ut.at(k, nd.flat);
      nd.w = g.weight(nd.flat) * wt_[k] * norm;
      nd.res = (nd.vt - sigma(nd.du)).norm();
      c.before += nd.w * nd.res;
      nodes.push_back(nd);
    });
    if (c.before <= 0) return;

    const int sx = b.hi[axis] - b.lo[axis];
    const int nmax = sx / std::max(1, opt_.min_period_cells);
    const double qa = c.frame.q(axis);
    std::vector<double> f(sx + 1), fp(sx + 1), fpp(sx + 1);
    double best = c.before;
    for (int periods = nmax; periods >= std::max(1, nmax - 1); --periods) {
      for (double tm : opt_.taus)
        for (double tp : opt_.taus) {
          AlignedPatchParams prm = base;
          prm.tau_minus = tm;
          prm.tau_plus = tp;
          prm.periods = periods;
          Patch patch;
          try {
            patch = make_aligned_patch(c.target, P_.delta, c.frame, phys, prm);
          } catch (const PreconditionError&) {
            continue;
          }
          for (int i = 0; i <= sx; ++i)
            patch.profile.eval(qa * g.x(axis, b.lo[axis] + i), f[i], fp[i], fpp[i]);
          double after = 0;
          bool ok = true;
          for (const auto& nd : nodes) {
            const double T = Tk[nd.kk], Tt = Tp[nd.kk];
            const double phi = T * nd.C * fp[nd.ia];
            if (std::fabs(phi) >= eta_ || std::fabs(nd.ut + Tt * nd.C * fp[nd.ia]) > cap_) {
              ok = false;
              break;
            }
            Vec p = nd.du + T * fp[nd.ia] * nd.gradC;
            p(axis) += T * nd.C * fpp[nd.ia] * qa;
            Vec bt = nd.vt;
            bt(axis) += Tt * nd.C * f[nd.ia] * qa;
            if (!member(P_, p, bt)) {
              ok = false;
              break;
            }
            after += nd.w * (bt - sigma(p)).norm();
          }
          if (!ok || after >= best) continue;
          best = after;
          c.prm = prm;
          c.viable = true;
        }
    }
    c.after = best;
    if (c.viable && c.after > (1 - opt_.min_gain) * c.before) c.viable = false;
  }

 private:
  const AdmissiblePair& P_;
  const StitchOptions& opt_;
  double cap_, eta_;
  std::vector<double> wt_;
};

// Size classes ordered by cell volume, largest first.
std::vector<std::pair<int, int>> size_classes(const GridSpec& g, const StitchOptions& opt) {
  const int n = g.dim();
  std::vector<std::pair<int, int>> cls;
  for (int sx : opt.space_sides)
    for (int st : opt.time_sides)
      if (sx >= 2 && st >= 2 && sx <= g.nx - 2 && st <= g.nt - 2) cls.push_back({sx, st});
  std::stable_sort(cls.begin(), cls.end(), [n](auto a, auto b) {
    double va = std::pow(a.first, n) * a.second, vb = std::pow(b.first, n) * b.second;
    if (va != vb) return va > vb;
    return a.first > b.first;
  });
  return cls;
}

std::vector<IndexBox> positions(const GridSpec& g, int sx, int st) {
  const int n = g.dim();
  std::vector<int> xs, ts;
  for (int i = 1; i + sx <= g.nx - 1; i += std::max(1, sx / 2)) xs.push_back(i);
  for (int k = 1; k + st <= g.nt - 1; k += std::max(1, st / 2)) ts.push_back(k);
  std::vector<IndexBox> out;
  if (xs.empty() || ts.empty()) return out;
  std::array<std::size_t, kMaxDim + 1> c{};
  while (true) {
    IndexBox b;
    b.dim = n;
    for (int a = 0; a < n; ++a) {
      b.lo[a] = xs[c[a]];
      b.hi[a] = b.lo[a] + sx;
    }
    b.lo[n] = ts[c[n]];
    b.hi[n] = b.lo[n] + st;
    out.push_back(b);
    int a = 0;
    while (a <= n) {
      std::size_t lim = a < n ? xs.size() : ts.size();
      if (++c[a] < lim) break;
      c[a] = 0;
      ++a;
    }
    if (a > n) break;
  }
  return out;
}

// Closure nodes: an owned node on the boundary of b means the open boxes
// overlap even though their interior nodes do not.
bool box_free(const AdmissiblePair& P, const IndexBox& b) {
  bool free = true;
  const std::size_t N = P.grid.spatial_size();
  for_each_node(b, false, [&](const int* idx, int k) {
    if (P.owned[k * N + P.grid.flat(idx)]) free = false;
  });
  return free;
}

double half_margin(const Candidate& c, double delta) {
  const RankOneFrame& f = c.frame;
  double a = (1 - 2 * c.prm.tau_minus) * f.t_minus, b = (1 - 2 * c.prm.tau_plus) * f.t_plus;
  double m = 1e300;
  for (int i = 0; i <= 40; ++i) {
    double t = a + (b - a) * i / 40.0;
    m = std::min(m, s_delta_boundary_distance(f.endpoint(c.target, t), delta));
  }
  return 0.5 * m;
}

}  // namespace

AdmissiblePair initial_pair(std::shared_ptr<const BoundaryDatum> datum, const FluxProfile& prof) {
  if (!datum) throw PreconditionError("initial_pair: missing boundary datum");
  AdmissiblePair P;
  P.datum = datum;
  P.grid = datum->u_star.grid;
  P.delta = prof.delta;
  P.m_minus = prof.m_minus;
  P.mu = datum->mu;
  P.u = datum->u_star;
  P.v = datum->v_star;
  P.vt = datum->v_star_t;
  const GridSpec& g = P.grid;
  const int n = g.dim();
  const std::size_t N = g.spatial_size();
  P.du = VectorField(g, n);
  P.ut = ScalarField(g);
  for (int k = 0; k < g.nt; ++k)
    for (std::size_t s = 0; s < N; ++s) {
      P.du.set(k, s, P.u.grad(k, s, Stencil::reflect));
      P.ut.at(k, s) = P.u.time_derivative(k, s);
    }
  P.owned.assign(g.size(), 0);
  return P;
}

double residual(const AdmissiblePair& P) {
  const GridSpec& g = P.grid;
  const std::size_t N = g.spatial_size();
  auto wt = time_weights(g);
  double acc = 0;
  for (int k = 0; k < g.nt; ++k)
    for (std::size_t s = 0; s < N; ++s) acc += wt[k] * g.weight(s) * node_residual(P, k, s);
  return acc / omega_T(g);
}

AdmissibilityReport check_admissible(const AdmissiblePair& P) {
  AdmissibilityReport r;
  const GridSpec& g = P.grid;
  const std::size_t N = g.spatial_size();
  const BoundaryDatum& D = *P.datum;
  long inside = 0, members = 0;
  for (int k = 0; k < g.nt; ++k)
    for (std::size_t s = 0; s < N; ++s) {
      const bool bnd = g.on_boundary(s) || k == 0 || k == g.nt - 1;
      if (bnd) {
        r.trace_deviation = std::max(r.trace_deviation, std::fabs(P.u.at(k, s) - D.u_star.at(k, s)));
        r.trace_deviation =
            std::max(r.trace_deviation, (P.v.get(k, s) - D.v_star.get(k, s)).norm());
      }
      if (!g.on_boundary(s)) {
        r.div_defect =
            std::max(r.div_defect, std::fabs(P.v.divergence(k, s, Stencil::reflect) - P.u.at(k, s)));
        ++inside;
        members += member(P, P.du.get(k, s), P.vt.get(k, s));
      }
      r.ut_max = std::max(r.ut_max, std::fabs(P.ut.at(k, s)));
      r.max_grad = std::max(r.max_grad, P.du.get(k, s).norm());
    }
  r.ut_ok = r.ut_max < P.mu;
  r.membership_fraction = inside ? static_cast<double>(members) / inside : 1.0;
  r.ok = r.trace_deviation == 0 && r.ut_ok && r.membership_fraction >= 0.99;
  return r;
}

CubeCover classify_cells(const AdmissiblePair& P, double tau, double eps, const StitchOptions& opt) {
  CubeCover cov;
  const GridSpec& g = P.grid;
  const int n = g.dim();
  const std::size_t N = g.spatial_size();
  auto good = good_mask(P, tau);
  auto wt = time_weights(g);
  const double norm = 1.0 / omega_T(g);
  for (int k = 0; k < g.nt; ++k)
    for (std::size_t s = 0; s < N; ++s) {
      double r = wt[k] * g.weight(s) * node_residual(P, k, s) * norm;
      if (interior_node(g, k, s)) ++cov.interior_nodes;
      if (good[k * N + s]) {
        ++cov.good_nodes;
        cov.good_residual += r;
      } else {
        cov.bad_residual += r;
      }
    }
  for (auto [sx, st] : size_classes(g, opt))
    for (const auto& b : positions(g, sx, st)) {
      bool ok = true;
      for (const auto& c : cov.cubes)
        if (b.interiors_overlap(c)) {
          ok = false;
          break;
        }
      if (!ok) continue;
      for_each_node(b, true, [&](const int* idx, int k) {
        if (!good[k * N + g.flat(idx)]) ok = false;
      });
      if (ok) cov.cubes.push_back(b);
    }
  // Continuity scale: tiles of side c cells in every direction.
  const double bound = eps / 12;
  const int cmax = std::min(g.nx - 1, g.nt - 1);
  for (int c = 1; c <= cmax; c *= 2) {
    double worst = 0;
    IndexBox t;
    t.dim = n;
    std::array<int, kMaxDim + 1> pos{};
    while (true) {
      for (int a = 0; a <= n; ++a) {
        int lim = (a < n ? g.nx : g.nt) - 1;
        t.lo[a] = std::min(pos[a], lim - c);
        t.hi[a] = t.lo[a] + c;
      }
      worst = std::max(worst, spread(P, t));
      int a = 0;
      while (a <= n) {
        int lim = (a < n ? g.nx : g.nt) - 1;
        pos[a] += c;
        if (pos[a] < lim) break;
        pos[a] = 0;
        ++a;
      }
      if (a > n || worst >= bound) break;
    }
    if (worst >= bound) break;
    double d2 = c * c * g.dt() * g.dt();
    for (int a = 0; a < n; ++a) d2 += c * c * g.h(a) * g.h(a);
    cov.nu = std::sqrt(d2);
  }
  return cov;
}

AdmissiblePair density_step(const AdmissiblePair& in, double eps, double eta,
                            const StitchOptions& opt, StepReport* report) {
  if (!(eps > 0) || !(eta > 0)) throw PreconditionError("density_step: eps and eta must be positive");
  StepReport rep;
  rep.eps = eps;
  rep.eta = eta;
  AdmissiblePair P = in;
  const GridSpec& g = P.grid;
  const int n = g.dim();
  const std::size_t N = g.spatial_size();
  rep.residual_in = residual(in);
  rep.eps_work = std::min(eps, opt.kappa * rep.residual_in);
  const double ut0 = P.ut.max_abs();
  rep.tau0 = P.mu - ut0;
  if (rep.tau0 <= 0) throw PreconditionError("density_step: time derivative exceeds mu");
  const double cap = ut0 + rep.tau0 / 2;

  double C = opt.inverse_constant;
  if (C <= 0) C = measure_inverse_constant(BoxDomain::unit(n), 8).constant;

  double running = rep.residual_in;
  const int step = in.patches.empty() ? 1 : in.patches.back().step + 1;
  rep.step = step;
  std::vector<std::size_t> fresh;
  double rho_lit_min = 1e300;

  if (rep.residual_in <= 0 || eps >= 1) {
    rep.status = "noop";
    rep.message = eps >= 1 ? "eps >= 1 admits every pair" : "residual already zero";
  } else {
    for (auto [sx, st] : size_classes(g, opt)) {
      if (running <= rep.eps_work) break;
      std::vector<Candidate> cands;
      for (const auto& b : positions(g, sx, st))
        if (box_free(P, b)) {
          Candidate c;
          c.box = b;
          cands.push_back(c);
        }
      StepSearch search(P, opt, cap, eta);
      parallel_for(cands.size(), [&](std::size_t i) { search.evaluate(cands[i]); });
      rep.candidates += static_cast<long>(cands.size());
      std::vector<std::size_t> order;
      for (std::size_t i = 0; i < cands.size(); ++i) {
        rep.unaligned += cands[i].unaligned;
        if (cands[i].viable) order.push_back(i);
      }
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cands[a].before - cands[a].after > cands[b].before - cands[b].after;
      });
      std::vector<IndexBox> taken;
      for (std::size_t i : order) {
        const Candidate& c = cands[i];
        bool clash = false;
        for (const auto& t : taken)
          if (c.box.interiors_overlap(t)) clash = true;
        if (clash) continue;
        taken.push_back(c.box);

        CubeRecord rec;
        rec.cube = c.box;
        rec.step = step;
        rec.residual_before = c.before;
        rec.oscillation = spread(P, c.box);
        const BoxDomain phys = physical_box(g, c.box);
        rec.patch = make_aligned_patch(c.target, P.delta, c.frame, phys, c.prm);
        const Patch& pt = rec.patch;
        const double qa = c.frame.q(c.axis);
        const double norm = 1.0 / omega_T(g);
        auto wt = time_weights(g);
        double after = 0, after_nogt = 0;
        for_each_node(c.box, true, [&](const int* idx, int k) {
          std::size_t s = g.flat(idx);
          std::size_t id = k * N + s;
          double T, Tt, d2;
          pt.time.eval(g.t(k), T, Tt, d2);
          std::array<double, kMaxDim> cv{}, cd{};
          for (int a = 0; a < n; ++a) pt.space[a].eval(g.x(a, idx[a]), cv[a], cd[a], d2);
          double Cp = 1;
          for (int a = 0; a < n; ++a) Cp *= cv[a];
          double f, fp, fpp;
          pt.profile.eval(qa * g.x(c.axis, idx[c.axis]), f, fp, fpp);
          const double phi = T * Cp * fp, phit = Tt * Cp * fp;
          Vec dphi = Vec::Zero(n);
          for (int o = 0; o < n; ++o) {
            if (o == c.axis) continue;
            double v = cd[o];
            for (int a = 0; a < n; ++a)
              if (a != o) v *= cv[a];
            dphi(o) = T * fp * v;
          }
          dphi(c.axis) = T * Cp * fpp * qa;
          const double gv = T * Cp * f * qa, gt = Tt * Cp * f * qa;
          P.u.at(k, s) += phi;
          P.ut.at(k, s) += phit;
          P.v.at(k, s, c.axis) += gv;
          P.vt.at(k, s, c.axis) += gt;
          for (int a = 0; a < n; ++a) P.du.at(k, s, a) += dphi(a);
          P.owned[id] = 1;
          const double w = g.weight(s) * wt[k] * norm;
          Vec p = P.du.get(k, s), bt = P.vt.get(k, s);
          after += w * (bt - sigma(p)).norm();
          bt(c.axis) -= gt;
          after_nogt += w * (bt - sigma(p)).norm();
          rec.sup_omega = std::max(rec.sup_omega, std::sqrt(phi * phi + gv * gv));
          rec.sup_phi_t = std::max(rec.sup_phi_t, std::fabs(phit));
          rec.g_t_max = std::max(rec.g_t_max, std::fabs(gt));
          rep.sup_change = std::max(rep.sup_change, std::fabs(phi));
        });
        rec.residual_after = after;
        rec.rho0 = half_margin(c, P.delta);
        double side_sum = phys.side_sum();
        double rho_lit = std::min({rep.tau0, rec.rho0 / (2 * C * side_sum),
                                   eps / (12 * C * side_sum), eta});
        rho_lit_min = std::min(rho_lit_min, rho_lit);
        rec.literal = rec.oscillation < std::min(rec.rho0 / 2, eps / 12) &&
                      rec.sup_omega < rho_lit && rec.sup_phi_t < rho_lit;
        rep.I1 += after_nogt;
        rep.I2 += std::max(0.0, after - after_nogt);
        running -= c.before - after;
        ++rep.accepted;
        rep.literal += rec.literal;
        fresh.push_back(P.patches.size());
        P.patches.push_back(std::move(rec));
        if (running <= rep.eps_work) break;
      }
    }
  }

  rep.residual_out = residual(P);
  double inside = 0;
  for (std::size_t i : fresh) inside += P.patches[i].residual_after;
  rep.I3 = std::max(0.0, rep.residual_out - inside);
  rep.audit_ok = rep.I1 + rep.I2 <= 2 * eps / 3 && rep.I3 <= eps / 3;
  rep.rho_literal = fresh.empty() ? 0.0 : rho_lit_min;
  rep.nu = classify_cells(P, opt.classify_tau, eps, opt).nu;
  rep.admissible = check_admissible(P);
  rep.contract_ok = rep.residual_out <= eps && rep.sup_change < eta && rep.admissible.ok;
  if (rep.status.empty()) {
    rep.status = rep.residual_out <= rep.eps_work || rep.contract_ok ? "ok" : "stalled";
    std::ostringstream os;
    os << rep.accepted << " cubes accepted of " << rep.candidates << " candidates";
    if (rep.unaligned) os << ", " << rep.unaligned << " unaligned";
    if (rep.residual_out > rep.eps_work) os << "; working target " << rep.eps_work << " not reached";
    rep.message = os.str();
  } else {
    rep.contract_ok = rep.residual_out <= eps && rep.admissible.ok;
  }
  if (report) *report = rep;
  return P;
}

std::vector<AdmissiblePair> iterate(std::shared_ptr<const BoundaryDatum> datum,
                                    const FluxProfile& prof,
                                    const std::vector<ScheduleEntry>& schedule,
                                    const StitchOptions& opt, std::vector<StepReport>* reports) {
  std::vector<AdmissiblePair> out;
  AdmissiblePair cur = initial_pair(datum, prof);
  for (const auto& e : schedule) {
    StepReport r;
    AdmissiblePair next = density_step(cur, e.eps, e.eta, opt, &r);
    r.step = static_cast<int>(out.size()) + 1;
    for (std::size_t i = cur.patches.size(); i < next.patches.size(); ++i)
      next.patches[i].step = r.step;
    if (reports) reports->push_back(r);
    out.push_back(next);
    if (!r.contract_ok) break;
    cur = std::move(next);
  }
  return out;
}

}  // namespace cvxint
