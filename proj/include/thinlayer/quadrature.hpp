#pragma once

#include <Eigen/Dense>

namespace thinlayer {

struct GaussRule {
  Eigen::ArrayXd nodes;    // on [-1, 1], ascending, exactly antisymmetric
  Eigen::ArrayXd weights;  // exactly symmetric
};

// Gauss-Legendre rule with n points; positive roots by Newton iteration, mirrored.
GaussRule gauss_legendre(int n);

}  // namespace thinlayer
