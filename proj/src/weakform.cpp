#include "cvxint/weakform.hpp"

#include <cmath>

namespace cvxint {

using nlohmann::json;

void TestFunction::eval(const GridSpec& g, const Vec& x, double t, double& z, Vec& dz,
                        double& zt) const {
  const int n = g.dim();
  const double tau = g.T > 0 ? (t - g.t0) / g.T : 0.0;
  const double tf = 1 + time_slope * tau, tfp = g.T > 0 ? time_slope / g.T : 0.0;
  dz = Vec::Zero(n);
  double s = 1;
  Vec ds = Vec::Zero(n);
  auto y = [&](int a) { return (x(a) - g.box.intervals[a].a) / g.box.intervals[a].length(); };
  auto L = [&](int a) { return g.box.intervals[a].length(); };
  switch (kind) {
    case Kind::constant:
      break;
    case Kind::cosine: {
      const double w = mode * M_PI;
      s = std::cos(w * y(axis));
      ds(axis) = -w * std::sin(w * y(axis)) / L(axis);
      break;
    }
    case Kind::cosine_product: {
      const double w = mode * M_PI;
      std::vector<double> c(n), d(n);
      for (int a = 0; a < n; ++a) {
        c[a] = std::cos(w * y(a));
        d[a] = -w * std::sin(w * y(a)) / L(a);
      }
      for (int a = 0; a < n; ++a) s *= c[a];
      for (int a = 0; a < n; ++a) {
        double v = d[a];
        for (int b = 0; b < n; ++b)
          if (b != a) v *= c[b];
        ds(a) = v;
      }
      break;
    }
    case Kind::polynomial: {
      // y^2 (1 - y)^2 + y / 2, a generic non-symmetric quartic
      const double v = y(axis);
      s = v * v * (1 - v) * (1 - v) + 0.5 * v;
      ds(axis) = (2 * v * (1 - v) * (1 - 2 * v) + 0.5) / L(axis);
      break;
    }
  }
  z = s * tf;
  dz = ds * tf;
  zt = s * tfp;
}

std::vector<TestFunction> test_catalog(int dim) {
  using K = TestFunction::Kind;
  std::vector<TestFunction> c;
  c.push_back({K::constant, 0, 0, 0, "one"});
  c.push_back({K::constant, 0, 0, 1, "one_t"});
  for (int a = 0; a < dim; ++a) {
    std::string ax = std::to_string(a);
    c.push_back({K::cosine, a, 1, 0, "cos1_x" + ax});
    c.push_back({K::cosine, a, 2, 0.5, "cos2_x" + ax + "_t"});
    c.push_back({K::cosine, a, 3, -0.5, "cos3_x" + ax + "_t"});
    c.push_back({K::polynomial, a, 0, 1, "quartic_x" + ax + "_t"});
  }
  if (dim > 1) c.push_back({K::cosine_product, 0, 1, 0.5, "cosprod1_t"});
  return c;
}

json WeakFormReport::to_json() const {
  return {{"times", times},
          {"max_residual", max_residual},
          {"worst", worst},
          {"identity_max", identity_max},
          {"max_grad_zeta", max_grad_zeta},
          {"pair_residual", pair_residual},
          {"bound", bound},
          {"bound_tight", bound_tight},
          {"within_bound", within_bound},
          {"rows", rows}};
}

WeakFormReport weak_form_residual(const AdmissiblePair& P, const std::vector<TestFunction>& cat) {
  WeakFormReport r;
  const GridSpec& g = P.grid;
  const std::size_t N = g.spatial_size();
  const int nt = g.nt;
  std::vector<int> levels;
  for (double frac : {0.25, 0.5, 1.0}) {
    int k = static_cast<int>(std::lround(frac * (nt - 1)));
    levels.push_back(k);
    r.times.push_back(g.t(k));
  }
  r.rows = json::array();
  r.pair_residual = residual(P);
  for (const auto& tf : cat) {
    // Running time integral of int(-u zeta_t + sigma(Du).Dzeta) by trapezoid.
    std::vector<double> inner(nt, 0.0), uz(nt, 0.0), vz(nt, 0.0);
    for (int k = 0; k < nt; ++k) {
      double acc = 0, a2 = 0, a3 = 0;
      for (std::size_t s = 0; s < N; ++s) {
        double z, zt;
        Vec dz;
        tf.eval(g, g.node(s), g.t(k), z, dz, zt);
        r.max_grad_zeta = std::max(r.max_grad_zeta, dz.norm());
        const double w = g.weight(s);
        acc += w * (-P.u.at(k, s) * zt + sigma(P.du.get(k, s)).dot(dz));
        a2 += w * P.u.at(k, s) * z;
        a3 += w * P.v.get(k, s).dot(dz);
      }
      inner[k] = acc;
      uz[k] = a2;
      vz[k] = a3;
    }
    double cum = 0;
    std::size_t li = 0;
    for (int k = 0; k < nt && li < levels.size(); ++k) {
      if (k > 0) cum += 0.5 * g.dt() * (inner[k] + inner[k - 1]);
      while (li < levels.size() && levels[li] == k) {
        const double res = std::fabs(uz[k] + cum - uz[0]);
        const double ident = std::fabs(vz[k] + uz[k]);
        r.identity_max = std::max(r.identity_max, ident);
        r.rows.push_back({{"test", tf.name}, {"s", g.t(k)}, {"residual", res}, {"identity", ident}});
        if (res > r.max_residual) {
          r.max_residual = res;
          r.worst = tf.name;
        }
        ++li;
      }
    }
  }
  r.bound = r.pair_residual * r.max_grad_zeta + 1e-4;
  r.bound_tight = r.pair_residual * g.box.volume() * g.T * r.max_grad_zeta + 1e-4;
  r.within_bound = r.max_residual <= r.bound;
  return r;
}

AdmissiblePair synthetic_exact_pair(int nx, int nt, double T) {
  // |Du| stays below 0.1 pi, well inside the identity range of the profile
  // built for M = 0.9.
  FluxProfile prof = build_profile(0.9, 0.5, 1);
  GridSpec g;
  g.box = BoxDomain::unit(1);
  g.nx = nx;
  g.nt = nt;
  g.T = T;
  ScalarField u0 = sample_initial_datum({{"name", "cosine"}, {"amplitude", 0.1}}, slice_grid(g));
  auto datum = std::make_shared<BoundaryDatum>(build_boundary_datum(u0, prof, g));
  return initial_pair(datum, prof);
}

}  // namespace cvxint
