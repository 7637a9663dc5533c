#pragma once

/** @file types.hpp
 *  Shared linear-algebra aliases. Everything numeric in the library is dense
 *  double-precision Eigen.
 */

#include <Eigen/Dense>

namespace afttest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace afttest
