#pragma once

#include <Eigen/Dense>

namespace lsot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace lsot
