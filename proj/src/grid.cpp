#include "thinlayer/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace thinlayer {

LayerGrid LayerGrid::unit_square(int nx, int ny, int nz, double eps) {
  LayerGrid g;
  g.nx = nx;
  g.ny = ny;
  g.nz = nz;
  g.x0 = -0.5;
  g.y0 = -0.5;
  g.hx = 1.0 / nx;
  g.hy = 1.0 / ny;
  g.hz = 1.0 / nz;
  g.eps = eps;
  g.mask.assign(static_cast<size_t>(nx) * ny, 1);
  g.validate();
  return g;
}

LayerGrid LayerGrid::disk(int n, int nz, double eps, double radius) {
  LayerGrid g;
  g.nx = g.ny = n;
  g.nz = nz;
  g.x0 = g.y0 = -radius;
  g.hx = g.hy = 2.0 * radius / n;
  g.hz = 1.0 / nz;
  g.eps = eps;
  g.mask.assign(static_cast<size_t>(n) * n, 0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double x = g.xc(i), y = g.yc(j);
      g.mask[g.column(i, j)] = (x * x + y * y < radius * radius) ? 1 : 0;
    }
  g.validate();
  return g;
}

void LayerGrid::validate() const {
  if (nx <= 0 || ny <= 0 || nz <= 0) throw std::invalid_argument("grid: cell counts must be positive");
  if (!(hx > 0) || !(hy > 0)) throw std::invalid_argument("grid: cell sizes must be positive");
  if (std::abs(hz * nz - 1.0) > 1e-14) throw std::invalid_argument("grid: hz must equal 1/nz");
  if (!(eps > 0)) throw std::invalid_argument("grid: eps must be positive");
  if (mask.size() != static_cast<size_t>(nx) * ny) throw std::invalid_argument("grid: mask size mismatch");
  // connectivity of the masked region by flood fill
  int first = -1, count = 0;
  for (int c = 0; c < nx * ny; ++c)
    if (mask[c]) {
      if (first < 0) first = c;
      ++count;
    }
  if (count == 0) throw std::invalid_argument("grid: empty mask");
  std::vector<char> seen(mask.size(), 0);
  std::vector<int> stack{first};
  seen[first] = 1;
  int reached = 0;
  while (!stack.empty()) {
    const int c = stack.back();
    stack.pop_back();
    ++reached;
    const int i = c % nx, j = c / nx;
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int q = 0; q < 4; ++q) {
      const int a = i + di[q], b = j + dj[q];
      if (inside(a, b) && !seen[column(a, b)]) {
        seen[column(a, b)] = 1;
        stack.push_back(column(a, b));
      }
    }
  }
  if (reached != count) throw std::invalid_argument("grid: masked region is not connected");
}

LayerGrid LayerGrid::planar() const {
  LayerGrid g = *this;
  g.nz = 1;
  g.hz = 1.0;
  return g;
}

LayerGrid LayerGrid::with_eps(double e) const {
  LayerGrid g = *this;
  g.eps = e;
  g.validate();
  return g;
}

double LayerGrid::h_max() const { return std::max({hx, hy, eps * hz}); }

int LayerGrid::active_columns() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), char(1)));
}

FaceKind LayerGrid::face_kind(int i, int j, int k, int d, int s) const {
  if (d == 2) {
    if (s == 0 && k == 0) return FaceKind::Bottom;
    if (s == 1 && k == nz - 1) return FaceKind::Top;
    return FaceKind::Interior;
  }
  const int step = s == 0 ? -1 : 1;
  const int a = d == 0 ? i + step : i;
  const int b = d == 1 ? j + step : j;
  return inside(a, b) ? FaceKind::Interior : FaceKind::Lateral;
}

Eigen::ArrayXd LayerGrid::column_weights() const {
  Eigen::ArrayXd w(num_columns());
  for (int c = 0; c < num_columns(); ++c) w(c) = mask[c] ? 1.0 : 0.0;
  return w;
}

Eigen::ArrayXd LayerGrid::cell_weights() const { return extrude(*this, column_weights()); }

FluidState3 FluidState3::zeros(const LayerGrid& g) {
  return FluidState3{Eigen::ArrayXd::Zero(g.num_cells()), Eigen::ArrayX3d::Zero(g.num_cells(), 3)};
}

FluidState2 FluidState2::zeros(const LayerGrid& g) {
  return FluidState2{Eigen::ArrayXd::Zero(g.num_columns()), Eigen::ArrayX2d::Zero(g.num_columns(), 2)};
}

double integrate3(const LayerGrid& g, const Eigen::ArrayXd& f) {
  double s = 0.0;
  const int nc = g.num_columns();
  for (int k = 0; k < g.nz; ++k)
    for (int c = 0; c < nc; ++c)
      if (g.mask[c]) s += f(k * nc + c);
  return s * g.cell_volume();
}

double integrate2(const LayerGrid& g, const Eigen::ArrayXd& f) {
  double s = 0.0;
  for (int c = 0; c < g.num_columns(); ++c)
    if (g.mask[c]) s += f(c);
  return s * g.column_area();
}

Eigen::ArrayXd column_average(const LayerGrid& g, const Eigen::ArrayXd& f) {
  // Extended-precision accumulation: the sum of a column is exact for O(1) values.
  const int nc = g.num_columns();
  Eigen::ArrayXd out(nc);
  for (int c = 0; c < nc; ++c) {
    long double s = 0.0L;
    for (int k = 0; k < g.nz; ++k) s += f(static_cast<Eigen::Index>(k) * nc + c);
    out(c) = static_cast<double>(s) / g.nz;
  }
  return out;
}

Eigen::ArrayXd extrude(const LayerGrid& g, const Eigen::ArrayXd& f) {
  const int nc = g.num_columns();
  Eigen::ArrayXd out(g.num_cells());
  for (int k = 0; k < g.nz; ++k) out.segment(static_cast<Eigen::Index>(k) * nc, nc) = f;
  return out;
}

}  // namespace thinlayer
