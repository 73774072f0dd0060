#include "thinlayer/radiation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "thinlayer/constitutive.hpp"
#include "thinlayer/quadrature.hpp"

namespace thinlayer {

AngularQuadrature AngularQuadrature::product(int n_polar, int n_azimuth) {
  if (n_polar < 2 || n_polar % 2 != 0) throw std::invalid_argument("quadrature: n_polar must be even");
  if (n_azimuth < 4 || n_azimuth % 4 != 0) throw std::invalid_argument("quadrature: n_azimuth must be a multiple of 4");
  const GaussRule g = gauss_legendre(n_polar);
  const int quarter = n_azimuth / 4;
  // first-quadrant azimuths; the other quadrants follow by exact sign flips
  std::vector<double> ca(quarter), sa(quarter);
  for (int q = 0; q < quarter; ++q) {
    const double phi = (q + 0.5) * 2.0 * std::numbers::pi / n_azimuth;
    ca[q] = std::cos(phi);
    sa[q] = std::sin(phi);
  }
  const int n = n_polar * n_azimuth;
  AngularQuadrature quad;
  quad.dirs.resize(n, 3);
  quad.w.resize(n);
  const double dphi = 2.0 * std::numbers::pi / n_azimuth;
  // index = p * n_azimuth + quadrant * quarter + q
  const double sx[4] = {1, -1, -1, 1}, sy[4] = {1, 1, -1, -1};
  for (int p = 0; p < n_polar; ++p) {
    const double mu = g.nodes(p);
    const double st = std::sqrt(1.0 - mu * mu);
    for (int quad_i = 0; quad_i < 4; ++quad_i)
      for (int q = 0; q < quarter; ++q) {
        // quadrants 1 and 3 run in reverse so that the azimuth increases monotonically
        const int qq = (quad_i % 2 == 0) ? q : quarter - 1 - q;
        const int m = p * n_azimuth + quad_i * quarter + q;
        quad.dirs(m, 0) = sx[quad_i] * st * ca[qq];
        quad.dirs(m, 1) = sy[quad_i] * st * sa[qq];
        quad.dirs(m, 2) = mu;
        quad.w(m) = g.weights(p) * dphi;
      }
  }
  auto find = [&](double a, double b, double c) {
    for (int m = 0; m < n; ++m)
      if (quad.dirs(m, 0) == a && quad.dirs(m, 1) == b && quad.dirs(m, 2) == c) return m;
    throw std::logic_error("quadrature: mirror direction missing");
  };
  quad.mirror_x.resize(n);
  quad.mirror_y.resize(n);
  quad.mirror_z.resize(n);
  quad.mirror_h.resize(n);
  for (int m = 0; m < n; ++m) {
    const double a = quad.dirs(m, 0), b = quad.dirs(m, 1), c = quad.dirs(m, 2);
    quad.mirror_x[m] = find(-a, b, c);
    quad.mirror_y[m] = find(a, -b, c);
    quad.mirror_z[m] = find(a, b, -c);
    quad.mirror_h[m] = find(-a, -b, c);
  }
  quad.validate();
  return quad;
}

void AngularQuadrature::validate() const {
  const int n = size();
  if (n == 0) throw std::invalid_argument("quadrature: empty");
  if (std::abs(w.sum() - 4.0 * std::numbers::pi) > 1e-12) throw std::invalid_argument("quadrature: weights must sum to 4 pi");
  for (int d = 0; d < 3; ++d)
    if (std::abs((w * dirs.col(d)).sum()) > 1e-12) throw std::invalid_argument("quadrature: nonzero first moment");
  const std::vector<int>* mirrors[4] = {&mirror_x, &mirror_y, &mirror_z, &mirror_h};
  for (const auto* mv : mirrors) {
    if (static_cast<int>(mv->size()) != n) throw std::invalid_argument("quadrature: mirror table size");
    for (int m = 0; m < n; ++m)
      if (w((*mv)[m]) != w(m)) throw std::invalid_argument("quadrature: mirror weight mismatch");
  }
}

RadField RadField::zeros(int ncells, int ndirs, int nbands) {
  return RadField{Eigen::ArrayXXd::Zero(ncells, static_cast<Eigen::Index>(ndirs) * nbands), ndirs, nbands};
}

Eigen::Vector3d specular_reflect(const Eigen::Vector3d& dir, const Eigen::Vector3d& normal) {
  if (std::abs(dir.norm() - 1.0) > 1e-12 || std::abs(normal.norm() - 1.0) > 1e-12)
    throw std::domain_error("specular_reflect: unit vectors required");
  return dir - 2.0 * dir.dot(normal) * normal;
}

Eigen::ArrayXd radiative_source(const Eigen::ArrayXd& I_cell, double rho, double nu, const Opacities& opac,
                                const AngularQuadrature& quad) {
  const double sa = sigma_a(rho, opac), ss = sigma_s(rho, opac), B = planck_b(nu, rho, opac);
  const double mean = (quad.w * I_cell).sum() / quad.weight_sum();
  return sa * (B - I_cell) + ss * (mean - I_cell);
}

Eigen::ArrayXXd radiative_momentum(const RadField& rad, const Eigen::ArrayXd& rho, const AngularQuadrature& quad,
                                   const Opacities& opac, bool planar) {
  const int dim = planar ? 2 : 3;
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(rad.ncells(), dim);
  for (int b = 0; b < rad.nbands; ++b) {
    const double wb = opac.bands[b].weight;
    for (int m = 0; m < rad.ndirs; ++m) {
      const auto col = rad.I.col(rad.col(m, b));
      for (int d = 0; d < dim; ++d) out.col(d) += (wb * quad.w(m) * quad.dirs(m, d)) * col;
    }
  }
  for (int c = 0; c < rad.ncells(); ++c) out.row(c) *= sigma_a(rho(c), opac) + sigma_s(rho(c), opac);
  return out;
}

RadField equilibrium_field(const Eigen::ArrayXd& rho, const AngularQuadrature& quad, const Opacities& opac) {
  RadField f = RadField::zeros(static_cast<int>(rho.size()), quad.size(), opac.num_bands());
  for (int b = 0; b < f.nbands; ++b)
    for (int c = 0; c < f.ncells(); ++c) {
      const double B = planck_b(opac.bands[b].node, rho(c), opac);
      for (int m = 0; m < f.ndirs; ++m) f.I(c, f.col(m, b)) = B;
    }
  return f;
}

double radiation_stable_dt(const LayerGrid& grid, const AngularQuadrature& quad, bool planar) {
  double rate = 0.0;
  for (int m = 0; m < quad.size(); ++m) {
    double r = std::abs(quad.dirs(m, 0)) / grid.hx + std::abs(quad.dirs(m, 1)) / grid.hy;
    if (!planar) r += std::abs(quad.dirs(m, 2)) / (grid.eps * grid.hz);
    rate = std::max(rate, r);
  }
  return 1.0 / rate;
}

namespace {

// Upwind sweep for every (direction, band) column; returns the transported field.
RadField sweep(const RadField& rad, const LayerGrid& grid, const AngularQuadrature& quad, const Opacities& opac,
               double dt, LateralRadiation lateral, bool planar, double* outflow) {
  const int nx = grid.nx, ny = grid.ny, nz = planar ? 1 : grid.nz;
  const int nc = nx * ny;
  RadField out = rad;
  const double vol = planar ? grid.column_area() : grid.cell_volume();
  double lost = 0.0;
  for (int b = 0; b < rad.nbands; ++b) {
    const double wb = opac.bands[b].weight;
    for (int m = 0; m < rad.ndirs; ++m) {
      const double s1 = quad.dirs(m, 0), s2 = quad.dirs(m, 1), s3 = quad.dirs(m, 2);
      const double cx = dt * std::abs(s1) / grid.hx;
      const double cy = dt * std::abs(s2) / grid.hy;
      const double cz = planar ? 0.0 : dt * std::abs(s3) / (grid.eps * grid.hz);
      const double* I = rad.I.col(rad.col(m, b)).data();
      const double* Imx = rad.I.col(rad.col(quad.mirror_x[m], b)).data();
      const double* Imy = rad.I.col(rad.col(quad.mirror_y[m], b)).data();
      const double* Imz = rad.I.col(rad.col(quad.mirror_z[m], b)).data();
      double* O = out.I.col(out.col(m, b)).data();
      const int di = s1 > 0 ? -1 : 1, dj = s2 > 0 ? -1 : 1, dk = s3 > 0 ? -1 : 1;
      const bool spec = lateral == LateralRadiation::Specular;
      double lost_m = 0.0;
      for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
          for (int i = 0; i < nx; ++i) {
            if (!grid.inside(i, j)) continue;
            const int c = k * nc + j * nx + i;
            const double I0 = I[c];
            double ux, uy;
            if (grid.inside(i + di, j)) ux = I[c + di];
            else ux = spec ? Imx[c] : 0.0;
            if (grid.inside(i, j + dj)) uy = I[c + dj * nx];
            else uy = spec ? Imy[c] : 0.0;
            double v = I0 - cx * (I0 - ux) - cy * (I0 - uy);
            if (!planar) {
              const int kk = k + dk;
              const double uz = (kk >= 0 && kk < nz) ? I[c + dk * nc] : Imz[c];
              v -= cz * (I0 - uz);
            }
            O[c] = v;
            if (!spec) {
              if (!grid.inside(i - di, j)) lost_m += cx * I0;
              if (!grid.inside(i, j - dj)) lost_m += cy * I0;
            }
          }
      lost += wb * quad.w(m) * lost_m * vol;
    }
  }
  if (outflow) *outflow += lost;
  return out;
}

// Implicit local relaxation; rho is given per transported cell.
void source_stage(RadField& rad, const Eigen::ArrayXd& rho, const LayerGrid& grid,
                  const AngularQuadrature& quad, const Opacities& opac, double dt, bool planar,
                  TransportDiagnostics* diag) {
  const int nz = planar ? 1 : grid.nz;
  const int nc = grid.num_columns();
  const double vol = planar ? grid.column_area() : grid.cell_volume();
  const double wsum = quad.weight_sum();
  const int nd = rad.ndirs;
  double src = 0.0, diss = 0.0, b2 = 0.0;
  for (int k = 0; k < nz; ++k)
    for (int col = 0; col < nc; ++col) {
      if (!grid.mask[col]) continue;
      const int c = k * nc + col;
      const double sa = sigma_a(rho(c), opac), ss = sigma_s(rho(c), opac);
      for (int b = 0; b < rad.nbands; ++b) {
        const double wb = opac.bands[b].weight;
        const double B = planck_b(opac.bands[b].node, rho(c), opac);
        auto row = rad.I.row(c).segment(static_cast<Eigen::Index>(b) * nd, nd);
        const double mean = (quad.w.transpose() * row).sum() / wsum;
        const double mean_new = (mean + dt * sa * B) / (1.0 + dt * sa);
        const double denom = 1.0 + dt * (sa + ss);
        const double add = dt * (sa * B + ss * mean_new);
        double s_acc = 0.0, d_acc = 0.0;
        for (int m = 0; m < nd; ++m) {
          const double Iold = row(m);
          const double Inew = (Iold + add) / denom;
          row(m) = Inew;
          s_acc += quad.w(m) * (Inew - Iold);
          d_acc += quad.w(m) * (0.5 * sa * (B - Inew) * (B - Inew) + ss * (Inew - mean_new) * (Inew - mean_new));
        }
        src += wb * s_acc;
        diss += wb * d_acc;
        b2 += wb * 0.5 * sa * B * B * wsum;
      }
    }
  if (diag) {
    diag->source_integral += src * vol;
    diag->l2_dissipation += dt * diss * vol;
    diag->b2_source += dt * b2 * vol;
  }
}

void check_cfl(double dt, double limit, double cfl) {
  if (!(dt > 0)) throw std::invalid_argument("transport: dt must be positive");
  if (dt > cfl * limit * (1.0 + 1e-12))
    throw CflViolation("transport: dt=" + std::to_string(dt) + " exceeds " + std::to_string(cfl * limit));
}

RadField step_impl(const RadField& rad, const Eigen::ArrayXd& rho, const LayerGrid& grid,
                   const AngularQuadrature& quad, const Opacities& opac, double dt, const TransportConfig& cfg,
                   bool planar, TransportDiagnostics* diag) {
  check_cfl(dt, radiation_stable_dt(grid, quad, planar), cfg.cfl);
  double outflow = 0.0;
  RadField out = sweep(rad, grid, quad, opac, dt, cfg.lateral, planar, &outflow);
  if (diag) {
    diag->outflow += outflow;
    diag->substeps += 1;
  }
  if (cfg.sources) source_stage(out, rho, grid, quad, opac, dt, planar, diag);
  return out;
}

}  // namespace

RadField transport_step_3d(const RadField& rad, const FluidState3& state, const LayerGrid& grid,
                           const AngularQuadrature& quad, const Opacities& opac, double dt,
                           const TransportConfig& cfg, TransportDiagnostics* diag) {
  return step_impl(rad, state.rho, grid, quad, opac, dt, cfg, false, diag);
}

RadField transport_step_2d(const RadField& J, const FluidState2& state, const LayerGrid& grid,
                           const AngularQuadrature& quad, const Opacities& opac, double dt,
                           const TransportConfig& cfg, TransportDiagnostics* diag) {
  return step_impl(J, state.r, grid.planar(), quad, opac, dt, cfg, true, diag);
}

namespace {

RadField advance_impl(const RadField& rad, const Eigen::ArrayXd& rho, const LayerGrid& grid,
                      const AngularQuadrature& quad, const Opacities& opac, double dt, const TransportConfig& cfg,
                      bool planar, TransportDiagnostics* diag) {
  const double limit = cfg.cfl * radiation_stable_dt(grid, quad, planar);
  const int n = std::max(1, static_cast<int>(std::ceil(dt / limit - 1e-12)));
  const double sub = dt / n;
  RadField cur = rad;
  for (int s = 0; s < n; ++s) cur = step_impl(cur, rho, grid, quad, opac, sub, cfg, planar, diag);
  return cur;
}

}  // namespace

RadField advance_radiation_3d(const RadField& rad, const FluidState3& state, const LayerGrid& grid,
                              const AngularQuadrature& quad, const Opacities& opac, double dt,
                              const TransportConfig& cfg, TransportDiagnostics* diag) {
  return advance_impl(rad, state.rho, grid, quad, opac, dt, cfg, false, diag);
}

RadField advance_radiation_2d(const RadField& J, const FluidState2& state, const LayerGrid& grid,
                              const AngularQuadrature& quad, const Opacities& opac, double dt,
                              const TransportConfig& cfg, TransportDiagnostics* diag) {
  return advance_impl(J, state.r, grid.planar(), quad, opac, dt, cfg, true, diag);
}

BoundaryFluxReport boundary_flux_check(const RadField& rad, const LayerGrid& grid, const AngularQuadrature& quad,
                                       const Opacities& opac, LateralRadiation lateral, bool planar) {
  BoundaryFluxReport rep;
  const int nz = planar ? 1 : grid.nz;
  const int nc = grid.num_columns();
  auto face = [&](int c, int axis, double sign, bool specular) {
    const std::vector<int>& mir = axis == 0 ? quad.mirror_x : (axis == 1 ? quad.mirror_y : quad.mirror_z);
    double f = 0.0;
    for (int b = 0; b < rad.nbands; ++b) {
      double fb = 0.0;
      for (int m = 0; m < rad.ndirs; ++m) {
        const double sn = sign * quad.dirs(m, axis);
        double trace;
        if (sn > 0) trace = rad.I(c, rad.col(m, b));
        else trace = specular ? rad.I(c, rad.col(mir[m], b)) : 0.0;
        fb += quad.w(m) * sn * trace;
      }
      f += opac.bands[b].weight * fb;
    }
    rep.flux.push_back(f);
  };
  const bool spec_lat = lateral == LateralRadiation::Specular;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        if (!grid.inside(i, j)) continue;
        const int c = k * nc + grid.column(i, j);
        if (!grid.inside(i - 1, j)) face(c, 0, -1.0, spec_lat);
        if (!grid.inside(i + 1, j)) face(c, 0, 1.0, spec_lat);
        if (!grid.inside(i, j - 1)) face(c, 1, -1.0, spec_lat);
        if (!grid.inside(i, j + 1)) face(c, 1, 1.0, spec_lat);
        if (!planar && k == 0) face(c, 2, -1.0, true);
        if (!planar && k == nz - 1) face(c, 2, 1.0, true);
      }
  rep.faces = static_cast<int>(rep.flux.size());
  rep.min = rep.flux.empty() ? 0.0 : *std::min_element(rep.flux.begin(), rep.flux.end());
  return rep;
}

namespace {

double weighted_integral(const RadField& rad, const LayerGrid& grid, const AngularQuadrature& quad,
                         const Opacities& opac, bool planar, bool square) {
  const int nz = planar ? 1 : grid.nz;
  const int nc = grid.num_columns();
  double s = 0.0;
  for (int b = 0; b < rad.nbands; ++b)
    for (int m = 0; m < rad.ndirs; ++m) {
      const double* I = rad.I.col(rad.col(m, b)).data();
      double acc = 0.0;
      for (int k = 0; k < nz; ++k)
        for (int col = 0; col < nc; ++col)
          if (grid.mask[col]) {
            const double v = I[k * nc + col];
            acc += square ? v * v : v;
          }
      s += opac.bands[b].weight * quad.w(m) * acc;
    }
  return s * (planar ? grid.column_area() : grid.cell_volume());
}

}  // namespace

double radiative_energy(const RadField& rad, const LayerGrid& grid, const AngularQuadrature& quad,
                        const Opacities& opac, bool planar) {
  return weighted_integral(rad, grid, quad, opac, planar, false);
}

double radiation_half_l2(const RadField& rad, const LayerGrid& grid, const AngularQuadrature& quad,
                         const Opacities& opac, bool planar) {
  return 0.5 * weighted_integral(rad, grid, quad, opac, planar, true);
}

RadiationL2Report radiation_l2_energy(const std::vector<RadiationL2Entry>& series, double rel_tol) {
  RadiationL2Report rep;
  if (series.empty()) return rep;
  const double l2_0 = series.front().half_l2;
  double diss = 0.0, src = 0.0;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (size_t n = 0; n < series.size(); ++n) {
    if (n > 0) {
      diss += series[n].dissipation;
      src += series[n].b2_source;
    }
    const double lhs = series[n].half_l2 + diss;
    const double rhs = l2_0 + src;
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    const double margin = rhs - lhs;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (margin < -rel_tol * std::max(1.0, std::abs(rhs)) && rep.first_violation < 0) {
      rep.first_violation = static_cast<int>(n);
      rep.holds = false;
    }
  }
  return rep;
}

}  // namespace thinlayer
