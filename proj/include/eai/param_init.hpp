#pragma once

#include <Eigen/Core>
#include <cmath>

#include "eai/rng.hpp"

namespace eai {

// Uniform(-a, a) with a = 1/sqrt(fan_in); the shared weight initializer.
inline Eigen::MatrixXd uniform_fan_in(Eigen::Index rows, Eigen::Index cols, double fan_in,
                                      Rng& rng) {
  const double a = 1.0 / std::sqrt(fan_in);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = (2.0 * rng.uniform() - 1.0) * a;
    }
  }
  return m;
}

}  // namespace eai
