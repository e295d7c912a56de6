#include "cvxint/divinv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace cvxint {

BumpProfile BumpProfile::make(const Interval& iv, int nodes) {
  BumpProfile b;
  b.interval = iv;
  b.values.assign(nodes, 0.0);
  b.cumulative.assign(nodes, 0.0);
  const double L = iv.length(), h = L / (nodes - 1);
  const double c = 630.0 / std::pow(L, 9);
  for (int i = 0; i < nodes; ++i) {
    double s = i * h, r = L - s;
    b.values[i] = c * s * s * s * s * r * r * r * r;
  }
  for (int i = 1; i < nodes; ++i)
    b.cumulative[i] = b.cumulative[i - 1] + 0.5 * h * (b.values[i] + b.values[i - 1]);
  double total = b.cumulative.back();
  for (int i = 0; i < nodes; ++i) {
    b.values[i] /= total;
    b.cumulative[i] /= total;
  }
  b.cumulative.back() = 1.0;
  return b;
}

namespace {

// Dense array over up to three axes; collapsed axes have extent 1.
struct Arr {
  std::array<int, 3> N{1, 1, 1};
  std::vector<double> d;
  std::size_t idx(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + N[0] * (static_cast<std::size_t>(j) + N[1] * static_cast<std::size_t>(k));
  }
};

std::size_t at3(const std::array<int, 3>& N, const std::array<int, 3>& ii) {
  return static_cast<std::size_t>(ii[0]) + N[0] * (static_cast<std::size_t>(ii[1]) + N[1] * static_cast<std::size_t>(ii[2]));
}

// Recursive construction over the active axes; out[c] receives the
// component along axes[c] on the full shape of u.
void recurse(const Arr& u, const std::vector<int>& axes, const std::array<double, 3>& h,
             const std::array<Interval, 3>& ivs, std::vector<Arr>& out) {
  const int r = axes.front();
  const double hr = h[r];
  // Cumulative trapezoid of u along r.
  Arr cum = u;
  {
    std::array<int, 3> ii{};
    for (ii[2] = 0; ii[2] < u.N[2]; ++ii[2])
      for (ii[1] = 0; ii[1] < u.N[1]; ++ii[1])
        for (ii[0] = 0; ii[0] < u.N[0]; ++ii[0]) {
          if (ii[r] == 0) {
            cum.d[at3(u.N, ii)] = 0;
            continue;
          }
          auto jj = ii;
          --jj[r];
          cum.d[at3(u.N, ii)] = cum.d[at3(u.N, jj)] + 0.5 * hr * (u.d[at3(u.N, ii)] + u.d[at3(u.N, jj)]);
        }
  }
  out.assign(axes.size(), Arr{});
  for (auto& o : out) {
    o.N = u.N;
    o.d.assign(u.d.size(), 0.0);
  }
  if (axes.size() == 1) {
    out[0] = cum;
    return;
  }
  // Reduced input: full integral along r.
  Arr red;
  red.N = u.N;
  red.N[r] = 1;
  red.d.assign(static_cast<std::size_t>(red.N[0]) * red.N[1] * red.N[2], 0.0);
  {
    std::array<int, 3> ii{};
    for (ii[2] = 0; ii[2] < red.N[2]; ++ii[2])
      for (ii[1] = 0; ii[1] < red.N[1]; ++ii[1])
        for (ii[0] = 0; ii[0] < red.N[0]; ++ii[0]) {
          auto jj = ii;
          jj[r] = u.N[r] - 1;
          red.d[at3(red.N, ii)] = cum.d[at3(u.N, jj)];
        }
  }
  std::vector<int> rest(axes.begin() + 1, axes.end());
  std::vector<Arr> Z;
  recurse(red, rest, h, ivs, Z);
  BumpProfile bump = BumpProfile::make(ivs[r], u.N[r]);
  std::array<int, 3> ii{};
  for (ii[2] = 0; ii[2] < u.N[2]; ++ii[2])
    for (ii[1] = 0; ii[1] < u.N[1]; ++ii[1])
      for (ii[0] = 0; ii[0] < u.N[0]; ++ii[0]) {
        auto jj = ii;
        jj[r] = 0;
        const std::size_t full = at3(u.N, ii), redi = at3(red.N, jj);
        const double rb = bump.values[ii[r]], Pb = bump.cumulative[ii[r]];
        for (std::size_t c = 0; c < rest.size(); ++c) out[c + 1].d[full] = rb * Z[c].d[redi];
        out[0].d[full] = cum.d[full] - red.d[redi] * Pb;
      }
}

}  // namespace

void right_inverse_slice(const GridSpec& g, const double* u, double* v_out) {
  const int n = g.dim();
  Arr a;
  for (int ax = 0; ax < n; ++ax) a.N[ax] = g.nx;
  a.d.assign(u, u + g.spatial_size());
  std::array<double, 3> h{1, 1, 1};
  std::array<Interval, 3> ivs{};
  std::vector<int> axes;
  for (int ax = 0; ax < n; ++ax) {
    h[ax] = g.h(ax);
    ivs[ax] = g.box.intervals[ax];
    axes.push_back(ax);
  }
  std::vector<Arr> out;
  recurse(a, axes, h, ivs, out);
  const std::size_t N = g.spatial_size();
  for (std::size_t s = 0; s < N; ++s)
    for (int c = 0; c < n; ++c) v_out[s * n + axes[c]] = out[c].d[s];
}

VectorField right_inverse_static(const ScalarField& u) {
  GridSpec g = slice_grid(u.grid);
  VectorField v(g, g.dim());
  right_inverse_slice(g, u.slice(0), v.values.data());
  return v;
}

SpacetimeInverse right_inverse_spacetime(const ScalarField& u) {
  SpacetimeInverse r;
  const GridSpec& g = u.grid;
  const int n = g.dim();
  r.v = VectorField(g, n);
  const std::size_t N = g.spatial_size();
  const double umax = u.max_abs();
  for (int k = 0; k < g.nt; ++k) {
    right_inverse_slice(g, u.slice(k), r.v.values.data() + k * N * n);
    double m = std::fabs(slice_integral(g, u.slice(k))) / g.box.volume();
    r.max_slice_mean = std::max(r.max_slice_mean, m);
  }
  r.mean_warning = r.max_slice_mean > 1e-10 * std::max(umax, 1e-300);
  return r;
}

double divergence_defect(const VectorField& v, const ScalarField& u) {
  double m = 0;
  const std::size_t N = u.grid.spatial_size();
  for (int k = 0; k < u.grid.nt; ++k)
    for (std::size_t s = 0; s < N; ++s)
      m = std::max(m, std::fabs(v.divergence(k, s, Stencil::one_sided) - u.at(k, s)));
  return m;
}

ScalarField random_smooth_input(const GridSpec& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  ScalarField u(slice_grid(g));
  const int n = g.dim();
  const int kind = static_cast<int>(rng() % 3);
  // Fourier modes, steep tanh fronts, or products of single-signed bumps.
  struct Mode {
    std::array<double, 3> k, ph;
    double amp;
  };
  std::vector<Mode> modes(1 + rng() % 4);
  for (auto& m : modes) {
    for (int a = 0; a < 3; ++a) {
      m.k[a] = std::floor(U(rng) * 4);
      m.ph[a] = 2 * M_PI * U(rng);
    }
    m.amp = 2 * U(rng) - 1;
  }
  std::array<double, 3> c{}, steep{};
  for (int a = 0; a < 3; ++a) {
    c[a] = 0.1 + 0.8 * U(rng);
    steep[a] = 5 + 60 * U(rng);
  }
  const double sgn = U(rng) < 0.5 ? -1 : 1;
  const std::size_t N = g.spatial_size();
  for (std::size_t s = 0; s < N; ++s) {
    Vec x = g.node(s);
    std::array<double, 3> y{};
    for (int a = 0; a < n; ++a) {
      const auto& iv = g.box.intervals[a];
      y[a] = (x(a) - iv.a) / iv.length();
    }
    double val = 0;
    if (kind == 0) {
      for (const auto& m : modes) {
        double p = m.amp;
        for (int a = 0; a < n; ++a) p *= std::cos(M_PI * m.k[a] * y[a] + m.ph[a]);
        val += p;
      }
    } else if (kind == 1) {
      val = sgn;
      for (int a = 0; a < n; ++a) val *= std::tanh(steep[a] * (y[a] - c[a]));
    } else {
      val = sgn * std::tanh(steep[0] * (y[0] - c[0]) + 1.0);
      for (int a = 1; a < n; ++a) val *= 0.5 * (1 + std::tanh(steep[a] * (y[a] - c[a])));
      val += 0.2 * (U(rng) - 0.5);
    }
    u.values[s] = val;
  }
  return u;
}

ScalarField smooth_test_input(const GridSpec& g, int which) {
  if (which < 0 || which > 2) throw PreconditionError("smooth_test_input: which in {0, 1, 2}");
  ScalarField u(slice_grid(g));
  const int n = g.dim();
  for (std::size_t s = 0; s < g.spatial_size(); ++s) {
    Vec x = g.node(s);
    std::array<double, kMaxDim> y{};
    double sum = 0;
    for (int a = 0; a < n; ++a) {
      const auto& iv = g.box.intervals[a];
      y[a] = (x(a) - iv.a) / iv.length();
      sum += y[a];
    }
    const double y1 = n > 1 ? y[1] : 0.7;
    double v = 0;
    if (which == 0) v = std::sin(3 * y[0]) * y1 * y1 + 0.5;
    if (which == 1) v = std::exp(sum) - 1;
    if (which == 2) v = std::sin(2 * y[0] + y1) + y[0] * y1;
    u.values[s] = v;
  }
  const double m = u.max_abs();
  if (m > 0)
    for (double& v : u.values) v /= m;
  return u;
}

InverseConstant measure_inverse_constant(const BoxDomain& domain, int trials, std::uint64_t seed,
                                         int nx) {
  domain.validate();
  GridSpec g;
  g.box = domain;
  g.box.time_interval.reset();
  g.nx = nx;
  g.nt = 1;
  InverseConstant out;
  std::mt19937_64 rng(seed);
  const double S = domain.side_sum();
  for (int t = 0; t < trials; ++t) {
    ScalarField u = random_smooth_input(g, rng());
    double um = u.max_abs();
    if (um > 0) {
      VectorField v = right_inverse_static(u);
      out.constant = std::max(out.constant, v.max_norm() / (S * um));
    }
    out.history.push_back(out.constant);
  }
  return out;
}

}  // namespace cvxint
