#pragma once

#include <Eigen/Dense>

namespace cycleshift {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Default local error tolerance of the integrator. Every downstream
/// threshold in the library is calibrated against this value.
inline constexpr double kDefaultTolerance = 1e-10;

}  // namespace cycleshift
