#pragma once

#include <cmath>
#include <random>

#include "pds/geo.hpp"

namespace testing_support {

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

inline pds::Attitude random_attitude(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.14159, 3.14159);
  return {u(rng), u(rng) / 2.0, u(rng)};
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing_support
