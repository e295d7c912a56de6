#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cvxint {

// Small fixed-capacity vectors keep hot loops free of heap traffic.
inline constexpr int kMaxDim = 4;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

struct ConstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cvxint
