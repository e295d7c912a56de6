#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvxint/grid.hpp"

namespace cvxint {

// 64-byte header followed by little-endian f64 values in field order
// [(k * spatial_size + s) * ncomp + c]:
//   0  char[8]  "CVXINT01"
//   8  i32 dim, i32 ncomp, i32 nx, i32 nt
//  24  f64 t0, f64 T, f64 box lower, f64 box upper (shared by all axes)
//  56  i32 iteration, i32 reserved
struct FieldHeader {
  int dim = 1, ncomp = 1, nx = 2, nt = 1;
  double t0 = 0, T = 0, lo = 0, hi = 1;
  int iteration = 0;
};

struct FieldFile {
  FieldHeader header;
  std::vector<double> values;
  GridSpec grid() const;
};

void write_field(const std::string& path, const ScalarField& f, int iteration = 0);
void write_field(const std::string& path, const VectorField& f, int iteration = 0);
FieldFile read_field(const std::string& path);

// Initial datum from a file holding one scalar slice (nt = 1); the grid must
// match the run grid.
ScalarField read_initial_slice(const std::string& path, const GridSpec& run_grid);

}  // namespace cvxint
