#include "thinlayer/hydro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "thinlayer/constitutive.hpp"

namespace thinlayer {

void HydroStep3Config::validate() const {
  auto in01 = [](double c) { return c > 0.0 && c <= 1.0; };
  if (!in01(cfl_acoustic) || !in01(cfl_viscous) || !in01(cfl_radiation) || !in01(transport.cfl))
    throw std::invalid_argument("HydroStep3Config: CFL numbers must lie in (0,1]");
  if (max_halvings < 0) throw std::invalid_argument("HydroStep3Config: max_halvings < 0");
  if (!(vacuum_floor >= 0.0)) throw std::invalid_argument("HydroStep3Config: vacuum_floor < 0");
}

namespace {

HydroContext make_context(const LayerGrid& grid, const ModelParams& params, const AngularQuadrature& quad,
                          const ExternalSource& source, const HydroStep3Config& cfg, bool planar) {
  params.validate();
  cfg.validate();
  HydroContext ctx;
  ctx.grid = planar ? grid.planar() : grid;
  ctx.grid.validate();
  ctx.params = params;
  ctx.quad = quad;
  ctx.config = cfg;
  ctx.planar = planar;
  ctx.source = source;
  const int n = ctx.grid.num_cells();
  ctx.external_force = Eigen::ArrayXXd::Zero(n, 3);
  if (params.regime == FroudeRegime::SqrtEps) {
    ctx.selfgrav = std::make_shared<SelfGravityOperator>(ctx.grid, planar);
  } else if (source.size() > 0) {
    if (planar) {
      const auto ext = external_potential_2d(ctx.grid, source, params.G);
      ctx.external_force.leftCols(2) = ext.gradient.grad_phi;
    } else {
      ctx.external_force = grad_phi_external(ctx.grid, source, ctx.grid.eps, params.G).grad_phi;
    }
  }
  return ctx;
}

// Index arithmetic and ghost rules shared by the flux and gradient loops.
struct Mesh {
  const LayerGrid& g;
  int nx, ny, nz, ndim;
  double h[3];

  Mesh(const HydroContext& ctx)
      : g(ctx.grid), nx(ctx.grid.nx), ny(ctx.grid.ny), nz(ctx.planar ? 1 : ctx.grid.nz), ndim(ctx.planar ? 2 : 3) {
    h[0] = g.hx;
    h[1] = g.hy;
    h[2] = g.eps * g.hz;
  }

  bool in(int i, int j, int k) const { return k >= 0 && k < nz && g.inside(i, j); }
  int idx(int i, int j, int k) const { return (k * ny + j) * nx + i; }

  // Sign pattern of the viscous ghost across a wall normal to d: no-slip laterally, slip on top/bottom.
  static Eigen::Vector3d sigma(int d) { return d < 2 ? Eigen::Vector3d(-1, -1, -1) : Eigen::Vector3d(1, 1, -1); }
};

Eigen::Vector3d vel(const Eigen::ArrayX3d& u, int c) { return u.row(c).transpose().matrix(); }

// Velocity of the neighbour of (i,j,k) along d on side s (+1/-1), or its viscous ghost.
Eigen::Vector3d neighbour_velocity(const Mesh& m, const Eigen::ArrayX3d& u, int i, int j, int k, int d, int s) {
  int q[3] = {i, j, k};
  q[d] += s;
  if (m.in(q[0], q[1], q[2])) return vel(u, m.idx(q[0], q[1], q[2]));
  return Mesh::sigma(d).cwiseProduct(vel(u, m.idx(i, j, k)));
}

// Centred derivative of u along t at cell (i,j,k).
Eigen::Vector3d centred(const Mesh& m, const Eigen::ArrayX3d& u, int i, int j, int k, int t) {
  if (t >= m.ndim) return Eigen::Vector3d::Zero();
  return (neighbour_velocity(m, u, i, j, k, t, +1) - neighbour_velocity(m, u, i, j, k, t, -1)) / (2.0 * m.h[t]);
}

Eigen::Matrix3d cell_gradient(const Mesh& m, const Eigen::ArrayX3d& u, int i, int j, int k) {
  Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
  for (int t = 0; t < m.ndim; ++t) G.col(t) = centred(m, u, i, j, k, t);
  return G;
}

struct FaceFlux {
  double mass = 0.0;
  Eigen::Vector3d mom = Eigen::Vector3d::Zero();
};

// Rusanov flux along d between states L and R.
FaceFlux rusanov(double rl, const Eigen::Vector3d& ul, double rr, const Eigen::Vector3d& ur, int d,
                 const ModelParams& p) {
  const double pl = pressure(rl, p), pr = pressure(rr, p);
  const double cl = std::sqrt(pressure_derivative(rl, p)), cr = std::sqrt(pressure_derivative(rr, p));
  const double a = std::max(std::abs(ul(d)) + cl, std::abs(ur(d)) + cr);
  FaceFlux f;
  f.mass = 0.5 * (rl * ul(d) + rr * ur(d)) - 0.5 * a * (rr - rl);
  Eigen::Vector3d fl = rl * ul(d) * ul, fr = rr * ur(d) * ur;
  fl(d) += pl;
  fr(d) += pr;
  f.mom = 0.5 * (fl + fr) - 0.5 * a * (rr * ur - rl * ul);
  return f;
}

// Face stress column S(grad u) e_d between cells (or a cell and its wall ghost).
Eigen::Vector3d viscous_face(const Mesh& m, const Eigen::ArrayX3d& u, const ModelParams& p, const int* L,
                             const int* R, bool l_in, bool r_in, int d) {
  Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
  const Eigen::Vector3d sg = Mesh::sigma(d);
  Eigen::Vector3d ul, ur;
  if (l_in && r_in) {
    ul = vel(u, m.idx(L[0], L[1], L[2]));
    ur = vel(u, m.idx(R[0], R[1], R[2]));
  } else if (l_in) {
    ul = vel(u, m.idx(L[0], L[1], L[2]));
    ur = sg.cwiseProduct(ul);
  } else {
    ur = vel(u, m.idx(R[0], R[1], R[2]));
    ul = sg.cwiseProduct(ur);
  }
  G.col(d) = (ur - ul) / m.h[d];
  for (int t = 0; t < m.ndim; ++t) {
    if (t == d) continue;
    if (l_in && r_in) {
      G.col(t) = 0.5 * (centred(m, u, L[0], L[1], L[2], t) + centred(m, u, R[0], R[1], R[2], t));
    } else {
      const int* C = l_in ? L : R;
      const Eigen::Vector3d dc = centred(m, u, C[0], C[1], C[2], t);
      G.col(t) = 0.5 * (dc + sg.cwiseProduct(dc));
    }
  }
  // stress3 on a gradient with vanishing third row and column equals the planar stress S_h
  return stress3(G, p).col(d);
}

int num_faces(const Mesh& m, int d) {
  return d == 0 ? (m.nx + 1) * m.ny * m.nz : (d == 1 ? m.nx * (m.ny + 1) * m.nz : m.nx * m.ny * (m.nz + 1));
}

int face_index(const Mesh& m, int d, int i, int j, int k) {
  // (i,j,k) is the cell on the high side of the face
  if (d == 0) return (k * m.ny + j) * (m.nx + 1) + i;
  if (d == 1) return (k * (m.ny + 1) + j) * m.nx + i;
  return (k * m.ny + j) * m.nx + i;
}

// Total face fluxes (inviscid minus viscous) along d.
void face_fluxes(const Mesh& m, const Eigen::ArrayXd& rho, const Eigen::ArrayX3d& u, const ModelParams& p, int d,
                 bool viscous, Eigen::ArrayXd& fm, Eigen::ArrayX3d& fu) {
  const int nf = num_faces(m, d);
  fm = Eigen::ArrayXd::Zero(nf);
  fu = Eigen::ArrayX3d::Zero(nf, 3);
  const int ni = m.nx + (d == 0), nj = m.ny + (d == 1), nk = m.nz + (d == 2);
  for (int k = 0; k < nk; ++k)
    for (int j = 0; j < nj; ++j)
      for (int i = 0; i < ni; ++i) {
        int R[3] = {i, j, k}, L[3] = {i, j, k};
        L[d] -= 1;
        const bool l_in = m.in(L[0], L[1], L[2]), r_in = m.in(R[0], R[1], R[2]);
        if (!l_in && !r_in) continue;
        const Eigen::Vector3d ref = d < 2 ? Eigen::Vector3d::Ones() - 2.0 * Eigen::Vector3d::Unit(d)
                                          : Eigen::Vector3d(1, 1, -1);
        double rl = 0.0, rr = 0.0;
        Eigen::Vector3d ul, ur;
        if (l_in) {
          const int c = m.idx(L[0], L[1], L[2]);
          rl = rho(c);
          ul = vel(u, c);
        }
        if (r_in) {
          const int c = m.idx(R[0], R[1], R[2]);
          rr = rho(c);
          ur = vel(u, c);
        }
        // inviscid ghost: reflect the normal component only
        if (!l_in) {
          rl = rr;
          ul = ref.cwiseProduct(ur);
        }
        if (!r_in) {
          rr = rl;
          ur = ref.cwiseProduct(ul);
        }
        FaceFlux f = rusanov(rl, ul, rr, ur, d, p);
        if (!(l_in && r_in)) f.mass = 0.0;
        if (viscous) f.mom -= viscous_face(m, u, p, L, R, l_in, r_in, d);
        const int fi = face_index(m, d, i, j, k);
        fm(fi) = f.mass;
        fu.row(fi) = f.mom.transpose().array();
      }
}

Eigen::ArrayX3d pad3(const Eigen::ArrayXXd& a) {
  Eigen::ArrayX3d out = Eigen::ArrayX3d::Zero(a.rows(), 3);
  out.leftCols(std::min<Eigen::Index>(3, a.cols())) = a.leftCols(std::min<Eigen::Index>(3, a.cols()));
  return out;
}

bool has_radiation(const RadField& rad) { return rad.I.cols() > 0 && rad.I.rows() > 0; }

Eigen::ArrayX3d radiation_force(const HydroContext& ctx, const Eigen::ArrayXd& rho, const RadField& rad) {
  if (!ctx.config.radiation_momentum || !has_radiation(rad)) return Eigen::ArrayX3d::Zero(rho.size(), 3);
  return pad3(radiative_momentum(rad, rho, ctx.quad, ctx.params.opacities, ctx.planar));
}

struct Sources {
  Eigen::ArrayX3d gravity, centrifugal, radiation;
};

struct Update {
  Eigen::ArrayXd rho;
  Eigen::ArrayX3d u;
  EnergyLedger ledger;
};

// One forward Euler step; returns false when a density turns negative.
bool euler(const HydroContext& ctx, const Eigen::ArrayXd& rho, const Eigen::ArrayX3d& u, const RadField& rad,
           double dt, double t, const Eigen::ArrayX3d* gravity, Update& out) {
  const Mesh m(ctx);
  const double vol = ctx.cell_volume();
  const Eigen::ArrayX3d grav = gravity ? *gravity : gravity_force(ctx, rho);
  const Eigen::ArrayX3d cent = centrifugal_force(ctx);
  const Eigen::ArrayX3d srad = radiation_force(ctx, rho, rad);
  const Rhs rhs = hydro_rhs(ctx, rho, u, srad, t, &grav);

  out.rho = rho;
  out.u = u;
  EnergyLedger& L = out.ledger;
  const ModelParams& p = ctx.params;
  const double chi = p.chi;
  for (int k = 0; k < m.nz; ++k)
    for (int j = 0; j < m.ny; ++j)
      for (int i = 0; i < m.nx; ++i) {
        if (!ctx.grid.inside(i, j)) continue;
        const int c = m.idx(i, j, k);
        const Eigen::Vector3d uc = vel(u, c);
        const Eigen::Matrix3d G = cell_gradient(m, u, i, j, k);
        L.dissipation += dt * vol * contract(stress3(G, p), G);
        L.work_gravity += dt * vol * rho(c) * grav.row(c).matrix().dot(uc);
        L.work_centrifugal += dt * vol * rho(c) * cent.row(c).matrix().dot(uc);
        L.work_coriolis += dt * vol * rho(c) * chi * (uc(1) * uc(0) - uc(0) * uc(1));
        L.work_radiation += dt * vol * srad.row(c).matrix().dot(uc);

        const double rn = rho(c) + dt * rhs.mass(c);
        if (!(rn >= 0.0)) return false;
        const Eigen::Array3d mn = rho(c) * u.row(c).transpose() + dt * rhs.momentum.row(c).transpose();
        if (rn < ctx.config.vacuum_floor) {
          L.clip_mass += (ctx.config.vacuum_floor - rn) * vol;
          out.rho(c) = ctx.config.vacuum_floor;
          out.u.row(c).setZero();
        } else {
          out.rho(c) = rn;
          out.u.row(c) = (mn / rn).transpose();
        }
        if (ctx.planar) out.u(c, 2) = 0.0;
      }
  return true;
}

void accumulate(EnergyLedger& a, const EnergyLedger& b) {
  a.dissipation += b.dissipation;
  a.work_gravity += b.work_gravity;
  a.work_centrifugal += b.work_centrifugal;
  a.work_coriolis += b.work_coriolis;
  a.work_radiation += b.work_radiation;
  a.radiation_source += b.radiation_source;
  a.radiation_outflow += b.radiation_outflow;
  a.clip_mass += b.clip_mass;
}

// dt split into 2^k equal substeps until every density stays non-negative.
Update hydro_step(const HydroContext& ctx, const Eigen::ArrayXd& rho, const Eigen::ArrayX3d& u, const RadField& rad,
                  double dt, double t, const Eigen::ArrayX3d* gravity) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("hydro step: dt must be positive and finite");
  for (int k = 0; k <= ctx.config.max_halvings; ++k) {
    const int nsub = 1 << k;
    const double h = dt / nsub;
    Update cur{rho, u, {}};
    EnergyLedger total;
    bool ok = true;
    for (int s = 0; s < nsub && ok; ++s) {
      Update next;
      ok = euler(ctx, cur.rho, cur.u, rad, h, t + s * h, s == 0 ? gravity : nullptr, next);
      if (ok) {
        accumulate(total, next.ledger);
        cur.rho = std::move(next.rho);
        cur.u = std::move(next.u);
      }
    }
    if (ok) {
      const EnergyLedger snap = energy_snapshot(ctx, cur.rho, cur.u, rad);
      total.t = t + dt;
      total.dt = dt;
      total.kinetic = snap.kinetic;
      total.potential = snap.potential;
      total.radiative = snap.radiative;
      total.halvings = k;
      cur.ledger = total;
      return cur;
    }
  }
  std::ostringstream os;
  os << "hydro step at t=" << t << " with dt=" << dt << " produced negative density after "
     << ctx.config.max_halvings << " halvings (min rho " << rho.minCoeff() << ")";
  throw StepFailure(os.str());
}

}  // namespace

HydroContext HydroContext::make3d(const LayerGrid& grid, const ModelParams& params, const AngularQuadrature& quad,
                                  const ExternalSource& source, const HydroStep3Config& cfg) {
  return make_context(grid, params, quad, source, cfg, false);
}

HydroContext HydroContext::make2d(const LayerGrid& grid, const ModelParams& params, const AngularQuadrature& quad,
                                  const ExternalSource& source, const HydroStep3Config& cfg) {
  return make_context(grid, params, quad, source, cfg, true);
}

Eigen::ArrayX3d gravity_force(const HydroContext& ctx, const Eigen::ArrayXd& rho) {
  if (ctx.params.regime == FroudeRegime::SqrtEps) {
    if (!ctx.selfgrav) throw std::logic_error("gravity_force: context without self-gravity operator");
    const GravityField f = ctx.selfgrav->apply(rho, ctx.params.G);
    if (ctx.planar) return pad3(f.grad_phi);
    return f.grad_phi / ctx.grid.eps;
  }
  return ctx.external_force;
}

Eigen::ArrayX3d centrifugal_force(const HydroContext& ctx) {
  const LayerGrid& g = ctx.grid;
  const int nz = ctx.planar ? 1 : g.nz;
  const double c2 = ctx.params.chi * ctx.params.chi;
  Eigen::ArrayX3d f = Eigen::ArrayX3d::Zero(g.num_cells(), 3);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.index(i, j, k);
        const double x = g.xc(i), y = g.yc(j);
        if (ctx.params.centrifugal_form == CentrifugalForm::GradientOfSquare) {
          f(c, 0) = 2.0 * c2 * x;
          f(c, 1) = 2.0 * c2 * y;
        } else {
          const double r = std::hypot(x, y);
          if (r > 0.0) {
            f(c, 0) = c2 * x / r;
            f(c, 1) = c2 * y / r;
          }
        }
      }
  return f;
}

Eigen::ArrayXXd cell_gradients(const HydroContext& ctx, const Eigen::ArrayX3d& u) {
  const Mesh m(ctx);
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(ctx.grid.num_cells(), 9);
  for (int k = 0; k < m.nz; ++k)
    for (int j = 0; j < m.ny; ++j)
      for (int i = 0; i < m.nx; ++i) {
        if (!ctx.grid.inside(i, j)) continue;
        const Eigen::Matrix3d G = cell_gradient(m, u, i, j, k);
        out.row(m.idx(i, j, k)) = Eigen::Map<const Eigen::Matrix<double, 1, 9>>(G.data()).array();
      }
  return out;
}

Eigen::Matrix3d gradient_at(const Eigen::ArrayXXd& grads, int c) {
  Eigen::Matrix3d G;
  for (int q = 0; q < 9; ++q) G.data()[q] = grads(c, q);
  return G;
}

Eigen::ArrayX3d viscous_divergence(const HydroContext& ctx, const Eigen::ArrayX3d& u) {
  const Mesh m(ctx);
  Eigen::ArrayX3d out = Eigen::ArrayX3d::Zero(ctx.grid.num_cells(), 3);
  for (int d = 0; d < m.ndim; ++d) {
    Eigen::ArrayX3d fs = Eigen::ArrayX3d::Zero(num_faces(m, d), 3);
    const int ni = m.nx + (d == 0), nj = m.ny + (d == 1), nk = m.nz + (d == 2);
    for (int k = 0; k < nk; ++k)
      for (int j = 0; j < nj; ++j)
        for (int i = 0; i < ni; ++i) {
          int R[3] = {i, j, k}, L[3] = {i, j, k};
          L[d] -= 1;
          const bool l_in = m.in(L[0], L[1], L[2]), r_in = m.in(R[0], R[1], R[2]);
          if (!l_in && !r_in) continue;
          fs.row(face_index(m, d, i, j, k)) = viscous_face(m, u, ctx.params, L, R, l_in, r_in, d).transpose().array();
        }
    for (int k = 0; k < m.nz; ++k)
      for (int j = 0; j < m.ny; ++j)
        for (int i = 0; i < m.nx; ++i) {
          if (!ctx.grid.inside(i, j)) continue;
          int hi[3] = {i, j, k};
          hi[d] += 1;
          const int c = m.idx(i, j, k);
          out.row(c) += (fs.row(face_index(m, d, hi[0], hi[1], hi[2])) - fs.row(face_index(m, d, i, j, k))) / m.h[d];
        }
  }
  return out;
}

double korn_constant(const HydroContext& ctx) {
  const LayerGrid& g = ctx.grid;
  const int ncomp = ctx.planar ? 2 : 3;
  std::vector<std::pair<int, int>> dofs;
  for (int c = 0; c < g.num_cells(); ++c)
    if (g.mask[c % g.num_columns()])
      for (int d = 0; d < ncomp; ++d) dofs.emplace_back(c, d);
  const int n = static_cast<int>(dofs.size());
  Eigen::MatrixXd A(n, n);
  Eigen::ArrayX3d e = Eigen::ArrayX3d::Zero(g.num_cells(), 3);
  for (int j = 0; j < n; ++j) {
    e(dofs[j].first, dofs[j].second) = 1.0;
    const Eigen::ArrayX3d div = viscous_divergence(ctx, e);
    for (int i = 0; i < n; ++i) A(i, j) = -div(dofs[i].first, dofs[i].second);
    e(dofs[j].first, dofs[j].second) = 0.0;
  }
  const Eigen::MatrixXd sym = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Rhs hydro_rhs(const HydroContext& ctx, const Eigen::ArrayXd& rho, const Eigen::ArrayX3d& u,
              const Eigen::ArrayXXd& rad_momentum, double t, const Eigen::ArrayX3d* gravity) {
  const Mesh m(ctx);
  const int n = ctx.grid.num_cells();
  Rhs r{Eigen::ArrayXd::Zero(n), Eigen::ArrayX3d::Zero(n, 3)};
  const bool viscous = ctx.params.mu != 0.0 || ctx.params.xi != 0.0;
  for (int d = 0; d < m.ndim; ++d) {
    Eigen::ArrayXd fm;
    Eigen::ArrayX3d fu;
    face_fluxes(m, rho, u, ctx.params, d, viscous, fm, fu);
    for (int k = 0; k < m.nz; ++k)
      for (int j = 0; j < m.ny; ++j)
        for (int i = 0; i < m.nx; ++i) {
          if (!ctx.grid.inside(i, j)) continue;
          int hi[3] = {i, j, k};
          hi[d] += 1;
          const int c = m.idx(i, j, k), fh = face_index(m, d, hi[0], hi[1], hi[2]), fl = face_index(m, d, i, j, k);
          r.mass(c) -= (fm(fh) - fm(fl)) / m.h[d];
          r.momentum.row(c) -= (fu.row(fh) - fu.row(fl)) / m.h[d];
        }
  }

  Eigen::ArrayX3d grav_local;
  if (!gravity) {
    grav_local = gravity_force(ctx, rho);
    gravity = &grav_local;
  }
  const Eigen::ArrayX3d cent = centrifugal_force(ctx);
  const Eigen::ArrayX3d srad = pad3(rad_momentum.rows() == n ? rad_momentum : Eigen::ArrayXXd::Zero(n, 3));
  const double chi = ctx.params.chi;
  for (int k = 0; k < m.nz; ++k)
    for (int j = 0; j < m.ny; ++j)
      for (int i = 0; i < m.nx; ++i) {
        if (!ctx.grid.inside(i, j)) continue;
        const int c = m.idx(i, j, k);
        // -rho chi x u with chi = chi e3
        r.momentum(c, 0) += rho(c) * chi * u(c, 1);
        r.momentum(c, 1) -= rho(c) * chi * u(c, 0);
        r.momentum.row(c) += rho(c) * ((*gravity).row(c) + cent.row(c)) + srad.row(c);
      }
  if (ctx.forcing) {
    Eigen::ArrayXd fmass = Eigen::ArrayXd::Zero(n);
    Eigen::ArrayX3d fmom = Eigen::ArrayX3d::Zero(n, 3);
    ctx.forcing(t, ctx.grid, fmass, fmom);
    const Eigen::ArrayXd w = ctx.grid.cell_weights();
    r.mass += w * fmass;
    r.momentum += fmom.colwise() * w;
  }
  if (ctx.planar) r.momentum.col(2).setZero();
  return r;
}

double stable_dt(const HydroContext& ctx, const Eigen::ArrayXd& rho, const Eigen::ArrayX3d& u) {
  const Mesh m(ctx);
  const ModelParams& p = ctx.params;
  double acoustic = 0.0, rho_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < m.nz; ++k)
    for (int j = 0; j < m.ny; ++j)
      for (int i = 0; i < m.nx; ++i) {
        if (!ctx.grid.inside(i, j)) continue;
        const int c = m.idx(i, j, k);
        const double cs = std::sqrt(pressure_derivative(std::max(rho(c), 0.0), p));
        double s = 0.0;
        for (int d = 0; d < m.ndim; ++d) s += (std::abs(u(c, d)) + cs) / m.h[d];
        acoustic = std::max(acoustic, s);
        rho_min = std::min(rho_min, rho(c));
      }
  double dt = acoustic > 0.0 ? ctx.config.cfl_acoustic / acoustic : std::numeric_limits<double>::infinity();
  // largest symbol of div S: (4/3 mu + xi)|k|^2
  const double kappa = 4.0 / 3.0 * p.mu + p.xi;
  if (kappa > 0.0) {
    double inv = 0.0;
    for (int d = 0; d < m.ndim; ++d) inv += 1.0 / (m.h[d] * m.h[d]);
    dt = std::min(dt, ctx.config.cfl_viscous * std::max(rho_min, ctx.config.vacuum_floor) / (2.0 * kappa * inv));
  }
  return dt;
}

double stable_dt3d(const FluidState3& s, const HydroContext& ctx) { return stable_dt(ctx, s.rho, s.u); }

double stable_dt2d(const FluidState2& s, const HydroContext& ctx) {
  const FluidState3 s3 = to_state3(s);
  return stable_dt(ctx, s3.rho, s3.u);
}

std::pair<FluidState3, EnergyLedger> step3d(const FluidState3& state, const RadField& rad, const HydroContext& ctx,
                                            double dt, double t, const Eigen::ArrayX3d* gravity) {
  if (ctx.planar) throw std::invalid_argument("step3d: planar context");
  Update up = hydro_step(ctx, state.rho, state.u, rad, dt, t, gravity);
  return {FluidState3{std::move(up.rho), std::move(up.u)}, up.ledger};
}

std::pair<FluidState2, EnergyLedger> step2d(const FluidState2& state, const RadField& J, const HydroContext& ctx,
                                            double dt, double t, const Eigen::ArrayX3d* gravity) {
  if (!ctx.planar) throw std::invalid_argument("step2d: context is not planar");
  const FluidState3 s3 = to_state3(state);
  Update up = hydro_step(ctx, s3.rho, s3.u, J, dt, t, gravity);
  return {to_state2(FluidState3{std::move(up.rho), std::move(up.u)}), up.ledger};
}

Coupled3 advance3d(const FluidState3& state, const RadField& rad, const HydroContext& ctx, double dt, double t,
                   const Eigen::ArrayX3d* gravity) {
  auto [s, led] = step3d(state, rad, ctx, dt, t, gravity);
  Coupled3 out{std::move(s), rad, led, {}};
  if (has_radiation(rad)) {
    TransportConfig tc = ctx.config.transport;
    tc.cfl = std::min(tc.cfl, ctx.config.cfl_radiation);
    out.rad = advance_radiation_3d(rad, out.state, ctx.grid, ctx.quad, ctx.params.opacities, dt, tc, &out.rad_diag);
    out.ledger.radiation_source = out.rad_diag.source_integral;
    out.ledger.radiation_outflow = out.rad_diag.outflow;
    out.ledger.radiative = radiative_energy(out.rad, ctx.grid, ctx.quad, ctx.params.opacities, false);
  }
  return out;
}

Coupled2 advance2d(const FluidState2& state, const RadField& J, const HydroContext& ctx, double dt, double t,
                   const Eigen::ArrayX3d* gravity) {
  auto [s, led] = step2d(state, J, ctx, dt, t, gravity);
  Coupled2 out{std::move(s), J, led, {}};
  if (has_radiation(J)) {
    TransportConfig tc = ctx.config.transport;
    tc.cfl = std::min(tc.cfl, ctx.config.cfl_radiation);
    out.rad = advance_radiation_2d(J, out.state, ctx.grid, ctx.quad, ctx.params.opacities, dt, tc, &out.rad_diag);
    out.ledger.radiation_source = out.rad_diag.source_integral;
    out.ledger.radiation_outflow = out.rad_diag.outflow;
    out.ledger.radiative = radiative_energy(out.rad, ctx.grid, ctx.quad, ctx.params.opacities, true);
  }
  return out;
}

EnergyLedger energy_snapshot(const HydroContext& ctx, const Eigen::ArrayXd& rho, const Eigen::ArrayX3d& u,
                             const RadField& rad) {
  EnergyLedger e;
  const int n = ctx.grid.num_cells();
  Eigen::ArrayXd kin(n), pot(n);
  for (int c = 0; c < n; ++c) {
    const double r = std::max(rho(c), 0.0);
    kin(c) = 0.5 * r * u.row(c).square().sum();
    pot(c) = pressure_potential(r, ctx.params);
  }
  if (ctx.planar) {
    e.kinetic = integrate2(ctx.grid, kin);
    e.potential = integrate2(ctx.grid, pot);
  } else {
    e.kinetic = integrate3(ctx.grid, kin);
    e.potential = integrate3(ctx.grid, pot);
  }
  if (has_radiation(rad)) e.radiative = radiative_energy(rad, ctx.grid, ctx.quad, ctx.params.opacities, ctx.planar);
  return e;
}

EnergyReport energy_monitor(const EnergyLedger& initial, const std::vector<EnergyLedger>& series, double h,
                            double tol_scale) {
  EnergyReport rep;
  double dt_max = 0.0;
  for (const auto& l : series) dt_max = std::max(dt_max, l.dt);
  const double e0 = initial.total();
  rep.tolerance = tol_scale * (dt_max + h) * std::abs(e0);
  double diss = 0.0, src = 0.0;
  for (size_t n = 0; n < series.size(); ++n) {
    const EnergyLedger& l = series[n];
    diss += l.dissipation;
    src += l.work() + l.radiation_source;
    const double lhs = l.total() + diss, rhs = e0 + src;
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    const double v = std::max(0.0, lhs - rhs - rep.tolerance);
    rep.violation.push_back(v);
    if ((v > 0.0 || !std::isfinite(lhs) || !std::isfinite(rhs)) && rep.first_violation < 0) {
      rep.first_violation = static_cast<int>(n);
      rep.holds = false;
    }
  }
  return rep;
}

std::pair<FluidState3, RadField> extrude_2d_to_3d(const FluidState2& state, const RadField& J, const LayerGrid& grid) {
  FluidState3 s;
  s.rho = extrude(grid, state.r);
  s.u = Eigen::ArrayX3d::Zero(grid.num_cells(), 3);
  s.u.col(0) = extrude(grid, state.w.col(0));
  s.u.col(1) = extrude(grid, state.w.col(1));
  RadField rad = RadField::zeros(grid.num_cells(), J.ndirs, J.nbands);
  for (Eigen::Index q = 0; q < J.I.cols(); ++q) rad.I.col(q) = extrude(grid, J.I.col(q));
  return {std::move(s), std::move(rad)};
}

FluidState2 column_average_state(const FluidState3& state, const LayerGrid& grid) {
  FluidState2 s;
  s.r = column_average(grid, state.rho);
  s.w = Eigen::ArrayX2d::Zero(grid.num_columns(), 2);
  s.w.col(0) = column_average(grid, state.u.col(0));
  s.w.col(1) = column_average(grid, state.u.col(1));
  return s;
}

RadField column_average_rad(const RadField& rad, const LayerGrid& grid) {
  RadField out = RadField::zeros(grid.num_columns(), rad.ndirs, rad.nbands);
  for (Eigen::Index q = 0; q < rad.I.cols(); ++q) out.I.col(q) = column_average(grid, rad.I.col(q));
  return out;
}

FluidState3 to_state3(const FluidState2& s) {
  FluidState3 o;
  o.rho = s.r;
  o.u = Eigen::ArrayX3d::Zero(s.r.size(), 3);
  o.u.leftCols(2) = s.w;
  return o;
}

FluidState2 to_state2(const FluidState3& s) {
  FluidState2 o;
  o.r = s.rho;
  o.w = s.u.leftCols(2);
  return o;
}

}  // namespace thinlayer
