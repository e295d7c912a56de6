#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cvxint/common.hpp"

namespace cvxint {

struct Interval {
  double a = 0, b = 1;
  double length() const { return b - a; }
};

struct BoxDomain {
  std::vector<Interval> intervals;
  std::optional<Interval> time_interval;

  int dim() const { return static_cast<int>(intervals.size()); }
  double side_sum() const;
  double volume() const;  // spatial volume
  void validate() const;  // throws PreconditionError

  static BoxDomain unit(int n) { return BoxDomain{std::vector<Interval>(n, Interval{0, 1}), {}}; }
};

// Node-centred tensor grid on box x [t0, t0 + T]: nx nodes per spatial axis
// (end points included) and nt time levels.
struct GridSpec {
  BoxDomain box;
  double t0 = 0;
  double T = 1;
  int nx = 2;
  int nt = 2;

  int dim() const { return box.dim(); }
  double h(int axis) const { return box.intervals[axis].length() / (nx - 1); }
  double hmin() const;
  double dt() const { return nt > 1 ? T / (nt - 1) : 0.0; }
  double x(int axis, int i) const { return box.intervals[axis].a + i * h(axis); }
  double t(int k) const { return t0 + k * dt(); }
  std::size_t spatial_size() const;
  std::size_t size() const { return spatial_size() * nt; }
  // Multi-index <-> flat spatial index, axis 0 fastest.
  std::size_t flat(const int* idx) const;
  void unflat(std::size_t s, int* idx) const;
  bool on_boundary(std::size_t s) const;
  Vec node(std::size_t s) const;
  // Trapezoid weight of a spatial node (product of 1D weights).
  double weight(std::size_t s) const;
  void validate() const;
};

enum class Stencil {
  reflect,    // central everywhere, even reflection across the boundary
  one_sided,  // central interior, first-order one-sided on boundary nodes
};

struct ScalarField {
  GridSpec grid;
  std::vector<double> values;  // [k * spatial_size + s]

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g) : grid(g), values(g.size(), 0.0) {}

  double& at(int k, std::size_t s) { return values[k * grid.spatial_size() + s]; }
  double at(int k, std::size_t s) const { return values[k * grid.spatial_size() + s]; }
  const double* slice(int k) const { return values.data() + k * grid.spatial_size(); }
  double* slice(int k) { return values.data() + k * grid.spatial_size(); }

  Vec grad(int k, std::size_t s, Stencil st) const;
  double time_derivative(int k, std::size_t s) const;
  double max_abs() const;
};

struct VectorField {
  GridSpec grid;
  int ncomp = 1;
  std::vector<double> values;  // [(k * spatial_size + s) * ncomp + c]

  VectorField() = default;
  VectorField(const GridSpec& g, int nc) : grid(g), ncomp(nc), values(g.size() * nc, 0.0) {}

  double& at(int k, std::size_t s, int c) {
    return values[(k * grid.spatial_size() + s) * ncomp + c];
  }
  double at(int k, std::size_t s, int c) const {
    return values[(k * grid.spatial_size() + s) * ncomp + c];
  }
  Vec get(int k, std::size_t s) const;
  void set(int k, std::size_t s, const Vec& v);
  // Discrete divergence at a node (components must match spatial axes).
  double divergence(int k, std::size_t s, Stencil st) const;
  Vec time_derivative(int k, std::size_t s) const;
  double max_norm() const;  // max over nodes of the Euclidean norm
};

// Single-slice helpers: one time level views of a field.
GridSpec slice_grid(const GridSpec& g);

// Derivative along one axis of a slice array at a node.
double axis_derivative(const GridSpec& g, const double* slice, std::size_t s, int axis,
                       Stencil st);

// Trapezoid integral of a slice array over the spatial box.
double slice_integral(const GridSpec& g, const double* slice);

}  // namespace cvxint
