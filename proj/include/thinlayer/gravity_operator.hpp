#pragma once

#include <vector>

#include <Eigen/Dense>

#include "thinlayer/gravity.hpp"
#include "thinlayer/grid.hpp"

namespace thinlayer {

// Direct midpoint convolution with self-cell exclusion. For every (j, k) offset the x-direction
// coupling is a Toeplitz block; the sum over source rows is a dense product per block.
class SelfGravityOperator {
 public:
  // planar = true: single-layer kernel (x - y)/|x - y|^3 dA on omega, no eps.
  // planar = false: eps-scaled layer kernel, result multiplied by -eps G.
  SelfGravityOperator(const LayerGrid& grid, bool planar);

  GravityField apply(const Eigen::ArrayXd& density, double G) const;
  const LayerGrid& grid() const { return grid_; }

 private:
  const Eigen::MatrixXd& block(int dj, int dk, int c) const;

  LayerGrid grid_;
  bool planar_;
  int ncomp_;
  std::vector<Eigen::MatrixXd> blocks_;  // [(dk, dj, c)] nx x nx
};

}  // namespace thinlayer
