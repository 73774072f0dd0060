#include "thinlayer/gravity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "thinlayer/gravity_operator.hpp"
#include "thinlayer/quadrature.hpp"

namespace thinlayer {

namespace {

constexpr double kCoincident2 = 1e-28;

}  // namespace

ExternalSource ExternalSource::none() { return ExternalSource{Eigen::ArrayX3d(0, 3), Eigen::ArrayXd(0)}; }

ExternalSource ExternalSource::point(const Eigen::Vector3d& y, double m) {
  ExternalSource s{Eigen::ArrayX3d(1, 3), Eigen::ArrayXd(1)};
  s.nodes.row(0) = y.transpose().array();
  s.mass(0) = m;
  return s;
}

ExternalSource ExternalSource::bump(const Eigen::Vector3d& center, double radius, double total_mass, int n) {
  if (n < 2 || !(radius > 0)) throw std::invalid_argument("external bump: bad resolution or radius");
  const double h = 2.0 * radius / n;
  std::vector<Eigen::Vector3d> pts;
  std::vector<double> w;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d off((i + 0.5 - 0.5 * n) * h, (j + 0.5 - 0.5 * n) * h, (k + 0.5 - 0.5 * n) * h);
        const double q = off.squaredNorm() / (radius * radius);
        if (q >= 1.0) continue;
        pts.push_back(center + off);
        w.push_back((1.0 - q) * (1.0 - q));
      }
  double sum = 0.0;
  for (double v : w) sum += v;
  ExternalSource s{Eigen::ArrayX3d(pts.size(), 3), Eigen::ArrayXd(pts.size())};
  for (size_t p = 0; p < pts.size(); ++p) {
    s.nodes.row(p) = pts[p].transpose().array();
    s.mass(p) = total_mass * w[p] / sum;
  }
  return s;
}

GravityField grad_phi_selfgrav(const Eigen::ArrayXd& rho, const LayerGrid& grid, const ModelParams& params) {
  SelfGravityOperator op(grid, false);
  return op.apply(rho, params.G);
}

GravityField grad_single_layer_2d(const Eigen::ArrayXd& r, const LayerGrid& grid, double G) {
  SelfGravityOperator op(grid.planar(), true);
  return op.apply(r, G);
}

GravityField grad_phi_external(const LayerGrid& grid, const ExternalSource& source, double eps, double G,
                               int* skipped) {
  GravityField f{Eigen::ArrayXXd::Zero(grid.num_cells(), 3), GravityKind::Phi2};
  int skips = 0;
  for (int k = 0; k < grid.nz; ++k)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        if (!grid.inside(i, j)) continue;
        const double x = grid.xc(i), y = grid.yc(j), z = eps * grid.zc(k);
        double s0 = 0, s1 = 0, s2 = 0;
        for (int p = 0; p < source.size(); ++p) {
          const double dx = x - source.nodes(p, 0), dy = y - source.nodes(p, 1), dz = z - source.nodes(p, 2);
          const double d2 = dx * dx + dy * dy + dz * dz;
          if (d2 < kCoincident2) {
            ++skips;
            continue;
          }
          const double w = source.mass(p) / (d2 * std::sqrt(d2));
          s0 += w * dx;
          s1 += w * dy;
          s2 += w * dz;
        }
        const int c = grid.index(i, j, k);
        f.grad_phi(c, 0) = -G * s0;
        f.grad_phi(c, 1) = -G * s1;
        f.grad_phi(c, 2) = -G * s2;
      }
  if (skips > 0) std::fprintf(stderr, "grad_phi_external: %d coincident source nodes skipped\n", skips);
  if (skipped) *skipped = skips;
  return f;
}

double external_potential_at(const ExternalSource& source, const Eigen::Vector2d& x, double G) {
  double s = 0.0;
  for (int p = 0; p < source.size(); ++p) {
    const double dx = x(0) - source.nodes(p, 0), dy = x(1) - source.nodes(p, 1), dz = source.nodes(p, 2);
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < kCoincident2) continue;
    s += source.mass(p) / std::sqrt(d2);
  }
  return G * s;
}

Eigen::Vector2d external_gradient_at(const ExternalSource& source, const Eigen::Vector2d& x, double G) {
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  for (int p = 0; p < source.size(); ++p) {
    const double dx = x(0) - source.nodes(p, 0), dy = x(1) - source.nodes(p, 1), dz = source.nodes(p, 2);
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < kCoincident2) continue;
    const double w = source.mass(p) / (d2 * std::sqrt(d2));
    s(0) += w * dx;
    s(1) += w * dy;
  }
  return -G * s;
}

ExternalPotential2D external_potential_2d(const LayerGrid& grid, const ExternalSource& source, double G) {
  ExternalPotential2D out{Eigen::ArrayXd::Zero(grid.num_columns()),
                          GravityField{Eigen::ArrayXXd::Zero(grid.num_columns(), 2), GravityKind::External2D}};
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      if (!grid.inside(i, j)) continue;
      const Eigen::Vector2d x(grid.xc(i), grid.yc(j));
      const int c = grid.column(i, j);
      out.phi(c) = external_potential_at(source, x, G);
      out.gradient.grad_phi.row(c) = external_gradient_at(source, x, G).transpose().array();
    }
  return out;
}

double external_odd_moment(const ExternalSource& source, const LayerGrid& grid) {
  double worst = 0.0;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      if (!grid.inside(i, j)) continue;
      double s = 0.0;
      for (int p = 0; p < source.size(); ++p) {
        const double dx = grid.xc(i) - source.nodes(p, 0), dy = grid.yc(j) - source.nodes(p, 1);
        const double y3 = source.nodes(p, 2);
        const double d2 = dx * dx + dy * dy + y3 * y3;
        if (d2 < kCoincident2) continue;
        s += source.mass(p) * y3 / (d2 * std::sqrt(d2));
      }
      worst = std::max(worst, std::abs(s));
    }
  return worst;
}

LayerSum layer_kernel_sum(const Eigen::ArrayXd& r, const LayerGrid& grid, double eps, const Eigen::Vector2d& x,
                          double x3) {
  LayerSum out;
  const double vol = grid.cell_volume();
  for (int k = 0; k < grid.nz; ++k) {
    const double s = eps * (x3 - grid.zc(k));
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        if (!grid.inside(i, j)) continue;
        const double dx = x(0) - grid.xc(i), dy = x(1) - grid.yc(j);
        const double d2 = dx * dx + dy * dy + s * s;
        if (d2 < kCoincident2) continue;
        const double w = r(grid.column(i, j)) * vol / (d2 * std::sqrt(d2));
        out.horizontal(0) += w * dx;
        out.horizontal(1) += w * dy;
        out.vertical += w * s;
      }
  }
  return out;
}

Eigen::Vector2d planar_kernel_sum(const Eigen::ArrayXd& r, const LayerGrid& grid, int i0, int j0) {
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  const double area = grid.column_area();
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      if (!grid.inside(i, j) || (i == i0 && j == j0)) continue;
      const double dx = (i0 - i) * grid.hx, dy = (j0 - j) * grid.hy;
      const double d2 = dx * dx + dy * dy;
      const double w = r(grid.column(i, j)) * area / (d2 * std::sqrt(d2));
      out(0) += w * dx;
      out(1) += w * dy;
    }
  return out;
}

Eigen::Vector2d principal_value_polar(const DensityFn& r, const RayLengthFn& ray, const Eigen::Vector2d& x,
                                      int n_theta, int n_radial) {
  const GaussRule g = gauss_legendre(n_radial);
  const double r0 = r(x(0), x(1));
  const double dt = 2.0 * std::numbers::pi / n_theta;
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  for (int m = 0; m < n_theta; ++m) {
    const double t = (m + 0.5) * dt;
    const Eigen::Vector2d e(std::cos(t), std::sin(t));
    const double R = ray(x, t);
    double inner = 0.0;
    for (int q = 0; q < n_radial; ++q) {
      const double s = 0.5 * R * (g.nodes(q) + 1.0);
      const Eigen::Vector2d y = x + s * e;
      inner += 0.5 * R * g.weights(q) * (r(y(0), y(1)) - r0) / s;
    }
    acc -= e * (inner + r0 * std::log(R)) * dt;
  }
  return acc;
}

RayLengthFn ray_length_disk(double radius) {
  return [radius](const Eigen::Vector2d& x, double t) {
    const double b = x(0) * std::cos(t) + x(1) * std::sin(t);
    const double c = x.squaredNorm() - radius * radius;
    return -b + std::sqrt(b * b - c);
  };
}

RayLengthFn ray_length_box(double xlo, double xhi, double ylo, double yhi) {
  return [=](const Eigen::Vector2d& x, double t) {
    const double c = std::cos(t), s = std::sin(t);
    double best = std::numeric_limits<double>::infinity();
    if (c > 0) best = std::min(best, (xhi - x(0)) / c);
    if (c < 0) best = std::min(best, (xlo - x(0)) / c);
    if (s > 0) best = std::min(best, (yhi - x(1)) / s);
    if (s < 0) best = std::min(best, (ylo - x(1)) / s);
    return best;
  };
}

namespace {

bool strictly_decreasing(const std::vector<double>& v) {
  for (size_t n = 1; n < v.size(); ++n)
    if (!(v[n] < v[n - 1])) return false;
  return true;
}

Eigen::Vector2d sample_point(const LayerGrid& g, const KernelSample& s) { return {g.xc(s.i), g.yc(s.j)}; }

}  // namespace

KernelLimitReport kernel_limit_g3(const Eigen::ArrayXd& r, const LayerGrid& grid, const std::vector<double>& eps,
                                  const std::vector<KernelSample>& samples) {
  KernelLimitReport rep;
  rep.eps = eps;
  for (double e : eps) {
    double sup = 0.0, sup_lit = 0.0;
    for (const auto& s : samples) {
      const LayerSum ls = layer_kernel_sum(r, grid, e, sample_point(grid, s), s.x3);
      sup = std::max(sup, std::abs(e * ls.vertical));
      sup_lit = std::max(sup_lit, std::abs(ls.vertical));
    }
    rep.gap.push_back(sup);
    rep.literal.push_back(sup_lit);
  }
  rep.strictly_decreasing = strictly_decreasing(rep.gap);
  return rep;
}

KernelLimitReport kernel_limit_g4(const Eigen::ArrayXd& r, const LayerGrid& grid, const std::vector<double>& eps,
                                  const std::vector<KernelSample>& samples,
                                  const std::vector<Eigen::Vector2d>* oracle) {
  if (oracle && oracle->size() != samples.size())
    throw std::invalid_argument("kernel_limit_g4: one oracle value per sample required");
  KernelLimitReport rep;
  rep.eps = eps;
  std::vector<Eigen::Vector2d> planar;
  for (size_t n = 0; n < samples.size(); ++n) {
    planar.push_back(planar_kernel_sum(r, grid, samples[n].i, samples[n].j));
    if (oracle) rep.self_gap = std::max(rep.self_gap, (planar.back() - (*oracle)[n]).norm());
  }
  for (double e : eps) {
    double sup = 0.0, sup_o = 0.0;
    for (size_t n = 0; n < samples.size(); ++n) {
      const LayerSum ls = layer_kernel_sum(r, grid, e, sample_point(grid, samples[n]), samples[n].x3);
      sup = std::max(sup, (ls.horizontal - planar[n]).norm());
      if (oracle) sup_o = std::max(sup_o, (ls.horizontal - (*oracle)[n]).norm());
    }
    rep.gap.push_back(sup);
    if (oracle) rep.gap_vs_oracle.push_back(sup_o);
  }
  rep.strictly_decreasing = strictly_decreasing(rep.gap) && (!oracle || strictly_decreasing(rep.gap_vs_oracle));
  return rep;
}

void write_gravity_csv(const std::string& path, const GravityField& field, const LayerGrid& grid) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "x1,x2,x3,F1,F2,F3\n";
  const bool planar = field.grad_phi.cols() == 2;
  const int nz = planar ? 1 : grid.nz;
  char buf[256];
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        if (!grid.inside(i, j)) continue;
        const int c = planar ? grid.column(i, j) : grid.index(i, j, k);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", grid.xc(i), grid.yc(j),
                      planar ? 0.0 : grid.zc(k), field.grad_phi(c, 0), field.grad_phi(c, 1),
                      planar ? 0.0 : field.grad_phi(c, 2));
        os << buf;
      }
}

}  // namespace thinlayer
