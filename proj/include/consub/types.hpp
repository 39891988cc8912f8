#pragma once

#include <Eigen/Dense>

namespace consub {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

} // namespace consub
