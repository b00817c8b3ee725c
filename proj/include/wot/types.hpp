#pragma once

#include <Eigen/Dense>

namespace wot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Transport cost convention: reported costs are d_2^2 (no 1/2); potentials
// satisfy phi(x) + psi(y) + |x - y|^2 / 2 >= 0.
inline constexpr const char* kCostConvention =
    "cost=d2^2 (no 1/2); potentials use 1/2|x-y|^2";

}  // namespace wot
