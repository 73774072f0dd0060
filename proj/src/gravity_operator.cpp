#include "thinlayer/gravity_operator.hpp"

#include <algorithm>
#include <cmath>

namespace thinlayer {

SelfGravityOperator::SelfGravityOperator(const LayerGrid& grid, bool planar)
    : grid_(grid), planar_(planar), ncomp_(planar ? 2 : 3) {
  const int nx = grid_.nx, ny = grid_.ny, nz = planar_ ? 1 : grid_.nz;
  const double eps = grid_.eps;
  const double vol = planar_ ? grid_.column_area() : grid_.cell_volume();
  const int nj = 2 * ny - 1, nk = 2 * nz - 1;
  blocks_.assign(static_cast<size_t>(nj) * nk * ncomp_, Eigen::MatrixXd::Zero(nx, nx));
  for (int dk = -(nz - 1); dk <= nz - 1; ++dk)
    for (int dj = -(ny - 1); dj <= ny - 1; ++dj) {
      // offsets are source minus target; x - y = -(offset * h)
      const double dy = -dj * grid_.hy;
      const double dz = planar_ ? 0.0 : -eps * dk * grid_.hz;
      Eigen::ArrayXd kx(2 * nx - 1), ky(2 * nx - 1), kz(2 * nx - 1);
      for (int ox = -(nx - 1); ox <= nx - 1; ++ox) {
        const double dx = -ox * grid_.hx;
        const double d2 = dx * dx + dy * dy + dz * dz;
        const int m = ox + nx - 1;
        if (ox == 0 && dj == 0 && dk == 0) {
          kx(m) = ky(m) = kz(m) = 0.0;
          continue;
        }
        const double w = vol / (d2 * std::sqrt(d2));
        kx(m) = w * dx;
        ky(m) = w * dy;
        kz(m) = w * dz;
      }
      const size_t base = (static_cast<size_t>(dk + nz - 1) * nj + (dj + ny - 1)) * ncomp_;
      for (int c = 0; c < ncomp_; ++c) {
        const Eigen::ArrayXd& kc = c == 0 ? kx : (c == 1 ? ky : kz);
        Eigen::MatrixXd& M = blocks_[base + c];
        for (int it = 0; it < nx; ++it)
          for (int is = 0; is < nx; ++is) M(it, is) = kc(is - it + nx - 1);
      }
    }
}

const Eigen::MatrixXd& SelfGravityOperator::block(int dj, int dk, int c) const {
  const int ny = grid_.ny, nz = planar_ ? 1 : grid_.nz;
  const size_t base = (static_cast<size_t>(dk + nz - 1) * (2 * ny - 1) + (dj + ny - 1)) * ncomp_;
  return blocks_[base + c];
}

GravityField SelfGravityOperator::apply(const Eigen::ArrayXd& density, double G) const {
  const int nx = grid_.nx, ny = grid_.ny, nz = planar_ ? 1 : grid_.nz;
  const int nc = nx * ny;
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nx, ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (grid_.inside(i, j)) R(i, k * ny + j) = density(k * nc + j * nx + i);

  std::vector<Eigen::MatrixXd> out(ncomp_, Eigen::MatrixXd::Zero(nx, ny * nz));
  for (int dk = -(nz - 1); dk <= nz - 1; ++dk)
    for (int dj = -(ny - 1); dj <= ny - 1; ++dj) {
      const int j0 = std::max(0, -dj), j1 = std::min(ny, ny - dj);
      const int len = j1 - j0;
      if (len <= 0) continue;
      for (int k = std::max(0, -dk); k < std::min(nz, nz - dk); ++k) {
        const auto src = R.middleCols((k + dk) * ny + j0 + dj, len);
        for (int c = 0; c < ncomp_; ++c) out[c].middleCols(k * ny + j0, len).noalias() += block(dj, dk, c) * src;
      }
    }

  GravityField f{Eigen::ArrayXXd::Zero(nc * nz, ncomp_), planar_ ? GravityKind::SingleLayer2D : GravityKind::Phi1};
  const double scale = planar_ ? -G : -grid_.eps * G;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!grid_.inside(i, j)) continue;
        for (int c = 0; c < ncomp_; ++c) f.grad_phi(k * nc + j * nx + i, c) = scale * out[c](i, k * ny + j);
      }
  return f;
}

}  // namespace thinlayer
