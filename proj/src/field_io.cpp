#include "cvxint/field_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace cvxint {

static_assert(std::endian::native == std::endian::little, "field files assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'V', 'X', 'I', 'N', 'T', '0', '1'};

FieldHeader header_of(const GridSpec& g, int ncomp, int iteration) {
  for (const auto& iv : g.box.intervals)
    if (iv.a != g.box.intervals[0].a || iv.b != g.box.intervals[0].b)
      throw PreconditionError("write_field: the header stores one interval for all axes");
  return {g.dim(), ncomp, g.nx, g.nt, g.t0, g.T, g.box.intervals[0].a, g.box.intervals[0].b,
          iteration};
}

void write(const std::string& path, const FieldHeader& h, const std::vector<double>& v) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  char buf[64] = {};
  std::memcpy(buf, kMagic, 8);
  const std::int32_t ints[4] = {h.dim, h.ncomp, h.nx, h.nt};
  std::memcpy(buf + 8, ints, 16);
  const double dbl[4] = {h.t0, h.T, h.lo, h.hi};
  std::memcpy(buf + 24, dbl, 32);
  const std::int32_t tail[2] = {h.iteration, 0};
  std::memcpy(buf + 56, tail, 8);
  os.write(buf, 64);
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace

GridSpec FieldFile::grid() const {
  GridSpec g;
  g.box = BoxDomain{std::vector<Interval>(header.dim, Interval{header.lo, header.hi}), {}};
  g.nx = header.nx;
  g.nt = header.nt;
  g.t0 = header.t0;
  g.T = header.T;
  return g;
}

void write_field(const std::string& path, const ScalarField& f, int iteration) {
  write(path, header_of(f.grid, 1, iteration), f.values);
}

void write_field(const std::string& path, const VectorField& f, int iteration) {
  write(path, header_of(f.grid, f.ncomp, iteration), f.values);
}

FieldFile read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char buf[64];
  if (!is.read(buf, 64)) throw std::runtime_error(path + ": truncated header");
  if (std::memcmp(buf, kMagic, 8) != 0) throw std::runtime_error(path + ": bad magic");
  FieldFile f;
  std::int32_t ints[4], tail[2];
  double dbl[4];
  std::memcpy(ints, buf + 8, 16);
  std::memcpy(dbl, buf + 24, 32);
  std::memcpy(tail, buf + 56, 8);
  f.header = {ints[0], ints[1], ints[2], ints[3], dbl[0], dbl[1], dbl[2], dbl[3], tail[0]};
  const auto& h = f.header;
  if (h.dim < 1 || h.dim > kMaxDim || h.ncomp < 1 || h.nx < 2 || h.nt < 1)
    throw std::runtime_error(path + ": invalid header");
  std::size_t count = static_cast<std::size_t>(h.ncomp) * h.nt;
  for (int a = 0; a < h.dim; ++a) count *= h.nx;
  f.values.resize(count);
  if (!is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(count * 8)))
    throw std::runtime_error(path + ": truncated data");
  return f;
}

ScalarField read_initial_slice(const std::string& path, const GridSpec& run_grid) {
  FieldFile f = read_field(path);
  GridSpec s = slice_grid(run_grid);
  const auto& h = f.header;
  if (h.ncomp != 1 || h.nt != 1) throw PreconditionError(path + ": expected one scalar slice");
  if (h.dim != s.dim() || h.nx != s.nx)
    throw PreconditionError(path + ": grid does not match the run grid");
  for (const auto& iv : s.box.intervals)
    if (std::fabs(iv.a - h.lo) > 1e-12 || std::fabs(iv.b - h.hi) > 1e-12)
      throw PreconditionError(path + ": box does not match the run box");
  ScalarField u(s);
  u.values = f.values;
  return u;
}

}  // namespace cvxint
