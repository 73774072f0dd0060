#include "thinlayer/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace thinlayer {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  GaussRule rule{Eigen::ArrayXd(n), Eigen::ArrayXd(n)};
  const int half = n / 2;
  for (int m = 0; m < (n + 1) / 2; ++m) {
    // m-th largest root
    double x = std::cos(std::numbers::pi * (m + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int l = 2; l <= n; ++l) {
        const double p2 = ((2.0 * l - 1.0) * x * p1 - (l - 1.0) * p0) / l;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    if (n % 2 == 1 && m == half) x = 0.0;
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = x;
    for (int l = 2; l <= n; ++l) {
      const double p2 = ((2.0 * l - 1.0) * x * p1 - (l - 1.0) * p0) / l;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes(n - 1 - m) = x;
    rule.nodes(m) = -x;
    rule.weights(n - 1 - m) = w;
    rule.weights(m) = w;
  }
  return rule;
}

}  // namespace thinlayer
