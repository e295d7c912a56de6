#include "cvxint/parabolic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cvxint/hull.hpp"

namespace cvxint {

namespace {

// rho*(r)/r with the exact Perona-Malik branch below m_minus.
inline double flux_factor(const FluxProfile& prof, double r) {
  if (r <= prof.m_minus) return 1.0 / (1.0 + r * r);
  return prof.rho_star(r) / r;
}

double weighted_mean(const GridSpec& g, const double* u) {
  return slice_integral(g, u) / g.box.volume();
}

void rhs_1d(const FluxProfile& prof, int N, double h, const double* u, double* F, double* du) {
  for (int f = 0; f < N - 1; ++f) {
    double w = (u[f + 1] - u[f]) / h;
    F[f] = flux_factor(prof, std::fabs(w)) * w;
  }
  du[0] = 2 * F[0] / h;
  for (int i = 1; i < N - 1; ++i) du[i] = (F[i] - F[i - 1]) / h;
  du[N - 1] = -2 * F[N - 2] / h;
}

void rhs_2d(const FluxProfile& prof, int N, double hx, double hy, const double* u, double* Fx,
            double* Fy, double* du) {
  auto U = [&](int i, int j) {
    if (i < 0) i = -i;
    if (i > N - 1) i = 2 * (N - 1) - i;
    if (j < 0) j = -j;
    if (j > N - 1) j = 2 * (N - 1) - j;
    return u[i + static_cast<std::size_t>(N) * j];
  };
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N - 1; ++i) {
      double px = (U(i + 1, j) - U(i, j)) / hx;
      double py = 0.25 * (U(i, j + 1) - U(i, j - 1) + U(i + 1, j + 1) - U(i + 1, j - 1)) / hy;
      Fx[i + static_cast<std::size_t>(N - 1) * j] = flux_factor(prof, std::hypot(px, py)) * px;
    }
  for (int j = 0; j < N - 1; ++j)
    for (int i = 0; i < N; ++i) {
      double py = (U(i, j + 1) - U(i, j)) / hy;
      double px = 0.25 * (U(i + 1, j) - U(i - 1, j) + U(i + 1, j + 1) - U(i - 1, j + 1)) / hx;
      Fy[i + static_cast<std::size_t>(N) * j] = flux_factor(prof, std::hypot(px, py)) * py;
    }
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      double ax, ay;
      auto fx = [&](int ii) { return Fx[ii + static_cast<std::size_t>(N - 1) * j]; };
      auto fy = [&](int jj) { return Fy[i + static_cast<std::size_t>(N) * jj]; };
      if (i == 0)
        ax = 2 * fx(0) / hx;
      else if (i == N - 1)
        ax = -2 * fx(N - 2) / hx;
      else
        ax = (fx(i) - fx(i - 1)) / hx;
      if (j == 0)
        ay = 2 * fy(0) / hy;
      else if (j == N - 1)
        ay = -2 * fy(N - 2) / hy;
      else
        ay = (fy(j) - fy(j - 1)) / hy;
      du[i + static_cast<std::size_t>(N) * j] = ax + ay;
    }
}

StepDiagnostics level_diagnostics(const ScalarField& u, int k, const FluxProfile& prof) {
  StepDiagnostics d;
  const GridSpec& g = u.grid;
  d.t = g.t(k);
  d.mass = slice_integral(g, u.slice(k));
  d.max_grad = max_gradient(u, k);
  long interior = 0, member = 0;
  for (std::size_t s = 0; s < g.spatial_size(); ++s) {
    if (g.on_boundary(s)) continue;
    ++interior;
    Vec p = u.grad(k, s, Stencil::reflect);
    if (classify_membership(p, A_flux(prof, p), prof.delta, prof.m_minus) != Membership::none)
      ++member;
  }
  d.membership_fraction = interior ? static_cast<double>(member) / interior : 1.0;
  return d;
}

}  // namespace

double stable_dt(const GridSpec& g, double Theta) {
  double h = g.hmin();
  return h * h / (2 * g.dim() * Theta);
}

ScalarField solve_regularized(const ScalarField& u0, const FluxProfile& prof, const GridSpec& grid,
                              std::vector<StepDiagnostics>* diag, const SolveOptions& opt) {
  grid.validate();
  if (grid.dim() > 2) throw PreconditionError("solve_regularized: n must be 1 or 2");
  if (u0.grid.nx != grid.nx || u0.grid.dim() != grid.dim())
    throw PreconditionError("solve_regularized: u0 does not match the grid");
  ScalarField u(grid);
  const std::size_t N = grid.spatial_size();
  const double mean = weighted_mean(grid, u0.slice(0));
  for (std::size_t s = 0; s < N; ++s) u.at(0, s) = u0.slice(0)[s] - mean;

  const double dt_out = grid.dt();
  const double limit = stable_dt(grid, prof.Theta);
  int m = opt.substeps;
  if (m <= 0) m = std::max(1, static_cast<int>(std::ceil(dt_out / (opt.safety * limit))));
  const double dt = dt_out / m;
  if (dt > limit * (1 + 1e-12))
    throw NumericalError("solve_regularized: stability violation, dt exceeds h^2/(2 n Theta)");

  std::vector<double> cur(u.slice(0), u.slice(0) + N), du(N);
  std::vector<double> F1(N), F2(N);
  if (diag) {
    diag->clear();
    diag->push_back(level_diagnostics(u, 0, prof));
  }
  for (int k = 1; k < grid.nt; ++k) {
    for (int step = 0; step < m; ++step) {
      if (grid.dim() == 1)
        rhs_1d(prof, grid.nx, grid.h(0), cur.data(), F1.data(), du.data());
      else
        rhs_2d(prof, grid.nx, grid.h(0), grid.h(1), cur.data(), F1.data(), F2.data(), du.data());
      for (std::size_t s = 0; s < N; ++s) cur[s] += dt * du[s];
    }
    for (std::size_t s = 0; s < N; ++s) {
      if (!std::isfinite(cur[s])) {
        std::ostringstream os;
        os << "solve_regularized: non-finite value at level " << k << " node " << s;
        throw NumericalError(os.str());
      }
      u.at(k, s) = cur[s];
    }
    if (diag) diag->push_back(level_diagnostics(u, k, prof));
  }
  return u;
}

double max_gradient(const ScalarField& u, int k) {
  double m = 0;
  for (std::size_t s = 0; s < u.grid.spatial_size(); ++s)
    m = std::max(m, u.grad(k, s, Stencil::reflect).norm());
  return m;
}

MaxPrincipleReport check_gradient_max_principle(const ScalarField& u_star) {
  MaxPrincipleReport r;
  r.h = u_star.grid.hmin();
  double g0 = max_gradient(u_star, 0);
  for (int k = 0; k < u_star.grid.nt; ++k) {
    double gk = max_gradient(u_star, k);
    double ratio = g0 > 0 ? gk / g0 : 0.0;
    if (!r.ratios.empty() && ratio > r.ratios.back() + 1e-14) r.nonincreasing = false;
    r.ratios.push_back(ratio);
    r.ratio = std::max(r.ratio, ratio);
  }
  r.passed = r.ratio <= 1 + 10 * r.h;
  return r;
}

void neumann_laplacian(const GridSpec& g, const double* u, double* out) {
  const int n = g.dim(), N = g.nx;
  const std::size_t S = g.spatial_size();
  auto refl = [N](int i) {
    if (i < 0) return -i;
    if (i > N - 1) return 2 * (N - 1) - i;
    return i;
  };
  for (std::size_t s = 0; s < S; ++s) {
    int idx[kMaxDim];
    g.unflat(s, idx);
    double acc = 0;
    std::size_t stride = 1;
    for (int a = 0; a < n; ++a) {
      const double h = g.h(a);
      auto U = [&](int off) {
        int j = refl(idx[a] + off);
        return u[s + (static_cast<long>(j) - idx[a]) * static_cast<long>(stride)];
      };
      acc += (-U(2) + 16 * U(1) - 30 * U(0) + 16 * U(-1) - U(-2)) / (12 * h * h);
      stride *= N;
    }
    out[s] = acc;
  }
}

Vec neumann_gradient4(const GridSpec& g, const double* u, std::size_t s) {
  const int n = g.dim(), N = g.nx;
  int idx[kMaxDim];
  g.unflat(s, idx);
  Vec d(n);
  std::size_t stride = 1;
  for (int a = 0; a < n; ++a) {
    auto U = [&](int off) {
      int j = idx[a] + off;
      if (j < 0) j = -j;
      if (j > N - 1) j = 2 * (N - 1) - j;
      return u[s + (static_cast<long>(j) - idx[a]) * static_cast<long>(stride)];
    };
    d(a) = (-U(2) + 8 * U(1) - 8 * U(-1) + U(-2)) / (12 * g.h(a));
    stride *= N;
  }
  return d;
}

PoissonResult solve_neumann_poisson(const ScalarField& u0_slice, double tol) {
  const GridSpec g = slice_grid(u0_slice.grid);
  g.validate();
  if (g.nx < 5) throw PreconditionError("solve_neumann_poisson: need nx >= 5");
  const std::size_t S = g.spatial_size();
  const double* f = u0_slice.slice(0);
  double fmax = 0;
  for (std::size_t s = 0; s < S; ++s) fmax = std::max(fmax, std::fabs(f[s]));
  const double mean = weighted_mean(g, f);
  if (std::fabs(mean) > 1e-10 * std::max(fmax, 1e-300) && fmax > 0)
    throw PreconditionError("solve_neumann_poisson: input must have zero mean");

  PoissonResult res;
  res.h = ScalarField(g);
  if (fmax == 0) return res;

  std::vector<double> w(S);
  for (std::size_t s = 0; s < S; ++s) w[s] = g.weight(s);
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (std::size_t s = 0; s < S; ++s) acc += w[s] * a[s] * b[s];
    return acc;
  };
  auto project = [&](std::vector<double>& a) {
    double m = 0, tw = 0;
    for (std::size_t s = 0; s < S; ++s) {
      m += w[s] * a[s];
      tw += w[s];
    }
    m /= tw;
    for (auto& x : a) x -= m;
  };
  // Solve (-L) h = -f on the mean-zero subspace; -L is SPD there.
  std::vector<double> x(S, 0.0), r(S), p(S), Ap(S);
  for (std::size_t s = 0; s < S; ++s) r[s] = -f[s];
  project(r);
  p = r;
  double rr = dot(r, r);
  const double r0 = std::sqrt(rr);
  int it = 0;
  for (; it < 20 * static_cast<int>(S) + 100 && std::sqrt(rr) > tol * r0; ++it) {
    neumann_laplacian(g, p.data(), Ap.data());
    for (auto& a : Ap) a = -a;
    project(Ap);
    double alpha = rr / dot(p, Ap);
    for (std::size_t s = 0; s < S; ++s) {
      x[s] += alpha * p[s];
      r[s] -= alpha * Ap[s];
    }
    project(r);
    double rr_new = dot(r, r);
    for (std::size_t s = 0; s < S; ++s) p[s] = r[s] + (rr_new / rr) * p[s];
    rr = rr_new;
  }
  project(x);
  res.iterations = it;
  std::copy(x.begin(), x.end(), res.h.values.begin());
  std::vector<double> Lh(S);
  neumann_laplacian(g, x.data(), Lh.data());
  for (std::size_t s = 0; s < S; ++s) res.residual = std::max(res.residual, std::fabs(Lh[s] - f[s]));
  return res;
}

Membership classify_membership(const Vec& p, const Vec& beta, double delta, double m_minus,
                               double tol) {
  if (p.norm() <= m_minus + tol && (beta - sigma(p)).norm() <= tol) return Membership::k_delta;
  if (in_S_delta({p, beta}, delta)) return Membership::s_delta;
  return Membership::none;
}

BoundaryDatum build_boundary_datum(const ScalarField& u0_slice, const FluxProfile& prof,
                                   const GridSpec& grid, const SolveOptions& opt) {
  BoundaryDatum d;
  const GridSpec sg = slice_grid(grid);
  const std::size_t S = sg.spatial_size();
  const int n = grid.dim();
  ScalarField u0(sg);
  const double mean = weighted_mean(sg, u0_slice.slice(0));
  for (std::size_t s = 0; s < S; ++s) u0.values[s] = u0_slice.slice(0)[s] - mean;

  d.u_star = solve_regularized(u0, prof, grid, &d.diagnostics, opt);
  auto pr = solve_neumann_poisson(u0);
  d.v_star = VectorField(grid, n);
  d.v_star_t = VectorField(grid, n);
  for (int k = 0; k < grid.nt; ++k)
    for (std::size_t s = 0; s < S; ++s)
      d.v_star_t.set(k, s, A_flux(prof, d.u_star.grad(k, s, Stencil::reflect)));
  for (std::size_t s = 0; s < S; ++s) d.v_star.set(0, s, neumann_gradient4(sg, pr.h.slice(0), s));
  const double dt = grid.dt();
  for (int k = 1; k < grid.nt; ++k)
    for (std::size_t s = 0; s < S; ++s)
      for (int c = 0; c < n; ++c)
        d.v_star.at(k, s, c) = d.v_star.at(k - 1, s, c) +
                               0.5 * dt * (d.v_star_t.at(k - 1, s, c) + d.v_star_t.at(k, s, c));

  d.M = max_gradient(d.u_star, 0);
  double ut = 0;
  for (int k = 0; k < grid.nt; ++k)
    for (std::size_t s = 0; s < S; ++s) ut = std::max(ut, std::fabs(d.u_star.time_derivative(k, s)));
  d.mu = ut + 1;

  for (int k = 0; k < grid.nt; ++k) {
    for (std::size_t s = 0; s < S; ++s) {
      d.div_defect = std::max(
          d.div_defect, std::fabs(d.v_star.divergence(k, s, Stencil::reflect) - d.u_star.at(k, s)));
      if (!sg.on_boundary(s)) continue;
      int idx[kMaxDim];
      sg.unflat(s, idx);
      for (int a = 0; a < n; ++a)
        if (idx[a] == 0 || idx[a] == sg.nx - 1)
          d.normal_trace = std::max(d.normal_trace, std::fabs(d.v_star.at(k, s, a)));
    }
    if (d.M > 0) d.grad_ratio = std::max(d.grad_ratio, max_gradient(d.u_star, k) / d.M);
  }

  long interior = 0;
  for (int k = 0; k < grid.nt; ++k)
    for (std::size_t s = 0; s < S; ++s) {
      if (sg.on_boundary(s)) continue;
      ++interior;
      auto m = classify_membership(d.u_star.grad(k, s, Stencil::reflect), d.v_star_t.get(k, s),
                                   prof.delta, prof.m_minus);
      if (m == Membership::k_delta)
        ++d.k_delta_nodes;
      else if (m == Membership::s_delta)
        ++d.s_delta_nodes;
      else
        ++d.violating_nodes;
    }
  d.violating_fraction = interior ? static_cast<double>(d.violating_nodes) / interior : 0.0;
  if (d.violating_fraction > 0.01)
    throw ConstructionError("build_boundary_datum: more than 1% of interior nodes violate membership");
  return d;
}

ScalarField sample_initial_datum(const nlohmann::json& e, const GridSpec& g) {
  ScalarField u(slice_grid(g));
  const std::string name = e.at("name").get<std::string>();
  const std::size_t S = g.spatial_size();
  const double amp = e.value("amplitude", 1.0);
  for (std::size_t s = 0; s < S; ++s) {
    Vec x = g.node(s);
    Vec y(g.dim());
    for (int a = 0; a < g.dim(); ++a)
      y(a) = (x(a) - g.box.intervals[a].a) / g.box.intervals[a].length();
    double val;
    if (name == "zero") {
      val = 0;
    } else if (name == "cosine") {
      int axis = e.value("axis", 0);
      double mode = e.value("mode", 1.0);
      val = amp * std::cos(mode * M_PI * y(axis));
    } else if (name == "cosine_product") {
      double mode = e.value("mode", 1.0);
      val = amp;
      for (int a = 0; a < g.dim(); ++a) val *= std::cos(mode * M_PI * y(a));
    } else if (name == "gaussian") {
      double width = e.value("width", 0.15);
      std::vector<double> c = e.value("center", std::vector<double>(g.dim(), 0.5));
      double r2 = 0;
      for (int a = 0; a < g.dim(); ++a) r2 += (y(a) - c[a]) * (y(a) - c[a]);
      val = amp * std::exp(-r2 / (2 * width * width));
    } else {
      throw PreconditionError("sample_initial_datum: unknown catalog entry '" + name + "'");
    }
    u.values[s] = val;
  }
  return u;
}

std::string diagnostics_csv(const std::vector<StepDiagnostics>& d) {
  std::ostringstream os;
  os.precision(17);
  os << "t,mass,max_grad,membership_fraction\n";
  for (const auto& x : d) os << x.t << ',' << x.mass << ',' << x.max_grad << ',' << x.membership_fraction << '\n';
  return os.str();
}

}  // namespace cvxint
