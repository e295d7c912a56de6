#include "cvxint/grid.hpp"

#include <algorithm>
#include <cmath>

namespace cvxint {

double BoxDomain::side_sum() const {
  double s = 0;
  for (const auto& iv : intervals) s += iv.length();
  return s;
}

double BoxDomain::volume() const {
  double v = 1;
  for (const auto& iv : intervals) v *= iv.length();
  return v;
}

void BoxDomain::validate() const {
  if (intervals.empty()) throw PreconditionError("BoxDomain: no intervals");
  for (const auto& iv : intervals)
    if (!(iv.a < iv.b) || !std::isfinite(iv.a) || !std::isfinite(iv.b))
      throw PreconditionError("BoxDomain: need a < b with finite ends");
  if (time_interval && !(time_interval->a < time_interval->b))
    throw PreconditionError("BoxDomain: empty time interval");
}

double GridSpec::hmin() const {
  double m = h(0);
  for (int a = 1; a < dim(); ++a) m = std::min(m, h(a));
  return m;
}

std::size_t GridSpec::spatial_size() const {
  std::size_t s = 1;
  for (int a = 0; a < dim(); ++a) s *= static_cast<std::size_t>(nx);
  return s;
}

std::size_t GridSpec::flat(const int* idx) const {
  std::size_t s = 0, stride = 1;
  for (int a = 0; a < dim(); ++a) {
    s += stride * static_cast<std::size_t>(idx[a]);
    stride *= static_cast<std::size_t>(nx);
  }
  return s;
}

void GridSpec::unflat(std::size_t s, int* idx) const {
  for (int a = 0; a < dim(); ++a) {
    idx[a] = static_cast<int>(s % nx);
    s /= nx;
  }
}

bool GridSpec::on_boundary(std::size_t s) const {
  int idx[kMaxDim];
  unflat(s, idx);
  for (int a = 0; a < dim(); ++a)
    if (idx[a] == 0 || idx[a] == nx - 1) return true;
  return false;
}

Vec GridSpec::node(std::size_t s) const {
  int idx[kMaxDim];
  unflat(s, idx);
  Vec x(dim());
  for (int a = 0; a < dim(); ++a) x(a) = this->x(a, idx[a]);
  return x;
}

double GridSpec::weight(std::size_t s) const {
  int idx[kMaxDim];
  unflat(s, idx);
  double w = 1;
  for (int a = 0; a < dim(); ++a) {
    double wa = h(a);
    if (idx[a] == 0 || idx[a] == nx - 1) wa *= 0.5;
    w *= wa;
  }
  return w;
}

void GridSpec::validate() const {
  box.validate();
  if (dim() > 3) throw PreconditionError("GridSpec: at most three spatial axes");
  if (nx < 3) throw PreconditionError("GridSpec: nx must be at least 3");
  if (nt < 1) throw PreconditionError("GridSpec: nt must be at least 1");
  if (!(T > 0)) throw PreconditionError("GridSpec: T must be positive");
}

GridSpec slice_grid(const GridSpec& g) {
  GridSpec s = g;
  s.nt = 1;
  return s;
}

double axis_derivative(const GridSpec& g, const double* u, std::size_t s, int axis, Stencil st) {
  int idx[kMaxDim];
  g.unflat(s, idx);
  std::size_t stride = 1;
  for (int a = 0; a < axis; ++a) stride *= g.nx;
  const double h = g.h(axis);
  const int i = idx[axis];
  if (i > 0 && i < g.nx - 1) return (u[s + stride] - u[s - stride]) / (2 * h);
  if (st == Stencil::reflect) return 0.0;
  if (i == 0) return (u[s + stride] - u[s]) / h;
  return (u[s] - u[s - stride]) / h;
}

double slice_integral(const GridSpec& g, const double* u) {
  double acc = 0;
  const std::size_t N = g.spatial_size();
  for (std::size_t s = 0; s < N; ++s) acc += g.weight(s) * u[s];
  return acc;
}

Vec ScalarField::grad(int k, std::size_t s, Stencil st) const {
  Vec d(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) d(a) = axis_derivative(grid, slice(k), s, a, st);
  return d;
}

double ScalarField::time_derivative(int k, std::size_t s) const {
  if (grid.nt < 2) return 0;
  const double dt = grid.dt();
  if (k == 0) return (at(1, s) - at(0, s)) / dt;
  if (k == grid.nt - 1) return (at(k, s) - at(k - 1, s)) / dt;
  return (at(k + 1, s) - at(k - 1, s)) / (2 * dt);
}

double ScalarField::max_abs() const {
  double m = 0;
  for (double x : values) m = std::max(m, std::fabs(x));
  return m;
}

Vec VectorField::get(int k, std::size_t s) const {
  Vec v(ncomp);
  for (int c = 0; c < ncomp; ++c) v(c) = at(k, s, c);
  return v;
}

void VectorField::set(int k, std::size_t s, const Vec& v) {
  for (int c = 0; c < ncomp; ++c) at(k, s, c) = v(c);
}

double VectorField::divergence(int k, std::size_t s, Stencil st) const {
  int idx[kMaxDim];
  grid.unflat(s, idx);
  double acc = 0;
  std::size_t stride = 1;
  for (int a = 0; a < grid.dim(); ++a) {
    const double h = grid.h(a);
    const int i = idx[a];
    if (i > 0 && i < grid.nx - 1) {
      acc += (at(k, s + stride, a) - at(k, s - stride, a)) / (2 * h);
    } else if (st == Stencil::one_sided) {
      acc += i == 0 ? (at(k, s + stride, a) - at(k, s, a)) / h
                    : (at(k, s, a) - at(k, s - stride, a)) / h;
    } else {
      // Odd reflection of the normal component: ghost value is -v.
      acc += i == 0 ? at(k, s + stride, a) / h : -at(k, s - stride, a) / h;
    }
    stride *= grid.nx;
  }
  return acc;
}

Vec VectorField::time_derivative(int k, std::size_t s) const {
  Vec d(ncomp);
  const double dt = grid.dt();
  for (int c = 0; c < ncomp; ++c) {
    if (grid.nt < 2)
      d(c) = 0;
    else if (k == 0)
      d(c) = (at(1, s, c) - at(0, s, c)) / dt;
    else if (k == grid.nt - 1)
      d(c) = (at(k, s, c) - at(k - 1, s, c)) / dt;
    else
      d(c) = (at(k + 1, s, c) - at(k - 1, s, c)) / (2 * dt);
  }
  return d;
}

double VectorField::max_norm() const {
  double m = 0;
  const std::size_t N = grid.size();
  for (std::size_t i = 0; i < N; ++i) {
    double acc = 0;
    for (int c = 0; c < ncomp; ++c) acc += values[i * ncomp + c] * values[i * ncomp + c];
    m = std::max(m, std::sqrt(acc));
  }
  return m;
}

}  // namespace cvxint
