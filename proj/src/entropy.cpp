#include "thinlayer/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "thinlayer/constitutive.hpp"

namespace thinlayer {

const std::vector<std::string> kEntropyCsvColumns = {
    "t",  "E_total", "E_kin", "E_press", "E_rad", "R1",        "R2",          "R3",
    "R4", "R5",      "R6",    "R7",      "R8",    "envelope",  "lb_margin",   "dg_min_flux",
    "energy_violation"};

namespace {

void require_positive_target(const Eigen::ArrayXd& r, const LayerGrid& g, int nz) {
  const int nc = g.num_columns();
  for (int k = 0; k < nz; ++k)
    for (int c = 0; c < nc; ++c)
      if (g.mask[c] && !(r(k * nc + c) > 0.0)) throw std::domain_error("target density must be positive");
}

// sum_b w_b sum_m w_m f(I, J) per cell
template <typename F>
Eigen::ArrayXd angular_sum(const RadField& I, const RadField& J, const AngularQuadrature& quad,
                           const Opacities& opac, F f) {
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(I.ncells());
  if (I.I.cols() == 0) return out;
  for (int b = 0; b < I.nbands; ++b)
    for (int m = 0; m < I.ndirs; ++m) {
      const int q = I.col(m, b);
      out += opac.bands[b].weight * quad.w(m) * f(I.I.col(q), J.I.col(q));
    }
  return out;
}

double sum_active(const LayerGrid& g, const Eigen::ArrayXd& f) { return integrate3(g, f); }

Eigen::ArrayX3d extrude3(const LayerGrid& g, const Eigen::ArrayXXd& a) {
  Eigen::ArrayX3d out = Eigen::ArrayX3d::Zero(g.num_cells(), 3);
  for (Eigen::Index d = 0; d < std::min<Eigen::Index>(3, a.cols()); ++d) out.col(d) = extrude(g, a.col(d));
  return out;
}


}  // namespace

EntropyComponents relative_entropy(const FluidState3& s, const RadField& I, const FluidState3& target,
                                   const RadField& J, const LayerGrid& grid, const ModelParams& params,
                                   const AngularQuadrature& quad) {
  require_positive_target(target.rho, grid, grid.nz);
  const int n = grid.num_cells();
  Eigen::ArrayXd kin(n), pres(n);
  for (int c = 0; c < n; ++c) {
    const int col = c % grid.num_columns();
    if (!grid.mask[col]) {
      kin(c) = pres(c) = 0.0;
      continue;
    }
    kin(c) = 0.5 * s.rho(c) * (s.u.row(c) - target.u.row(c)).square().sum();
    pres(c) = relative_distance(std::max(s.rho(c), 0.0), target.rho(c), params);
  }
  EntropyComponents e;
  e.kinetic = sum_active(grid, kin);
  e.pressure = sum_active(grid, pres);
  if (I.I.cols() > 0) {
    const Eigen::ArrayXd rad = angular_sum(I, J, quad, params.opacities,
                                           [](const auto& a, const auto& b) { return (a - b).square(); });
    e.radiative = 0.5 * sum_active(grid, rad);
  }
  e.total = e.kinetic + e.pressure + e.radiative;
  return e;
}

Eigen::ArrayXd EssentialResidualMask::ess(const Eigen::ArrayXd& h) const {
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(h.size());
  for (Eigen::Index c = 0; c < h.size(); ++c)
    if (essential[c]) out(c) = h(c);
  return out;
}

Eigen::ArrayXd EssentialResidualMask::res(const Eigen::ArrayXd& h) const {
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(h.size());
  for (Eigen::Index c = 0; c < h.size(); ++c)
    if (!essential[c]) out(c) = h(c);
  return out;
}

int EssentialResidualMask::count_essential() const {
  return static_cast<int>(std::count(essential.begin(), essential.end(), 1));
}

EssentialResidualMask essential_residual_split(const Eigen::ArrayXd& rho, double rho_lo, double rho_hi) {
  if (!(rho_lo > 0.0) || !(rho_hi >= rho_lo)) throw std::invalid_argument("essential_residual_split: bad thresholds");
  EssentialResidualMask m;
  m.lower = 0.5 * rho_lo;
  m.upper = 2.0 * rho_hi;
  m.essential.resize(rho.size());
  for (Eigen::Index c = 0; c < rho.size(); ++c) m.essential[c] = (rho(c) >= m.lower && rho(c) <= m.upper) ? 1 : 0;
  return m;
}

EssentialResidualMask essential_residual_split(const Eigen::ArrayXd& rho, const Eigen::ArrayXd& r,
                                               const LayerGrid& grid) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int c = 0; c < grid.num_columns(); ++c)
    if (grid.mask[c]) {
      lo = std::min(lo, r(c));
      hi = std::max(hi, r(c));
    }
  return essential_residual_split(rho, lo, hi);
}

double lower_bound_weight(double rho, double r, double rho_lo, double rho_hi, const ModelParams& p) {
  if (rho >= 0.5 * rho_lo && rho <= 2.0 * rho_hi) return (rho - r) * (rho - r);
  return 1.0 + std::pow(std::max(rho, 0.0), p.gamma);
}

namespace {

std::vector<double> density_samples(double rho_lo, double rho_hi, int n, double rho_max) {
  std::vector<double> s;
  for (int i = 0; i < n; ++i) s.push_back(rho_max * i / (n - 1));
  // dense near and across both thresholds
  const double a = 0.5 * rho_lo, b = 2.0 * rho_hi;
  for (int i = 0; i < n; ++i) s.push_back(3.0 * b * i / (n - 1));
  for (double t : {a, b}) {
    s.push_back(t);
    s.push_back(std::nextafter(t, 0.0));
    s.push_back(std::nextafter(t, rho_max));
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

std::vector<double> target_samples(double rho_lo, double rho_hi, int n) {
  if (rho_hi == rho_lo) return {rho_lo};
  std::vector<double> s;
  for (int i = 0; i < n; ++i) s.push_back(rho_lo + (rho_hi - rho_lo) * i / (n - 1));
  return s;
}

}  // namespace

double fit_lower_bound_constant(const ModelParams& p, double rho_lo, double rho_hi, int n, double rho_max,
                                double safety) {
  if (n < 2) throw std::invalid_argument("fit_lower_bound_constant: n < 2");
  double best = std::numeric_limits<double>::infinity();
  for (double r : target_samples(rho_lo, rho_hi, n))
    for (double rho : density_samples(rho_lo, rho_hi, n, rho_max)) {
      const double w = lower_bound_weight(rho, r, rho_lo, rho_hi, p);
      if (w <= 0.0) continue;
      // near rho = r the ratio tends to H''(r)/2; cancellation makes E unreliable there
      if (std::abs(rho - r) < 1e-6 * r) continue;
      best = std::min(best, relative_distance(rho, r, p) / w);
    }
  return std::min(safety * best, 0.5);
}

LowerBoundSample sample_lower_bound(const ModelParams& p, double rho_lo, double rho_hi, double C, int n,
                                    double rho_max) {
  LowerBoundSample out;
  out.worst_margin = std::numeric_limits<double>::infinity();
  // offset grid so the samples differ from the fit grid
  for (int j = 0; j < n; ++j) {
    const double r = rho_hi == rho_lo ? rho_lo : rho_lo + (rho_hi - rho_lo) * (j + 0.5) / n;
    for (int i = 0; i < n; ++i) {
      const double rho = rho_max * (i + 0.37) / n;
      const double m = relative_distance(rho, r, p) - C * lower_bound_weight(rho, r, rho_lo, rho_hi, p);
      ++out.samples;
      if (m < out.worst_margin) {
        out.worst_margin = m;
        out.worst_rho = rho;
        out.worst_r = r;
      }
    }
  }
  out.holds = out.worst_margin >= 0.0;
  return out;
}

LowerBoundCheck entropy_lower_bound_check(const FluidState3& s, const RadField& I, const FluidState3& target,
                                          const RadField& J, const LayerGrid& grid, const ModelParams& params,
                                          const AngularQuadrature& quad, double rho_lo, double rho_hi, double C) {
  LowerBoundCheck out;
  out.C = C;
  const EntropyComponents e = relative_entropy(s, I, target, J, grid, params, quad);
  out.entropy = e.total;
  const int n = grid.num_cells();
  Eigen::ArrayXd w(n);
  for (int c = 0; c < n; ++c) {
    const double rho = std::max(s.rho(c), 0.0);
    w(c) = lower_bound_weight(rho, target.rho(c), rho_lo, rho_hi, params) +
           rho * (s.u.row(c) - target.u.row(c)).square().sum();
  }
  out.bound = sum_active(grid, w);
  if (I.I.cols() > 0)
    out.bound += sum_active(grid, angular_sum(I, J, quad, params.opacities,
                                              [](const auto& a, const auto& b) { return (a - b).square(); }));
  out.margin = out.entropy - C * out.bound;
  out.holds = out.margin >= -1e-14 * std::max(1.0, out.entropy);
  return out;
}

Eigen::ArrayX2d pressure_gradient_2d(const HydroContext& ctx2, const Eigen::ArrayXd& r) {
  const LayerGrid& g = ctx2.grid;
  Eigen::ArrayX2d out = Eigen::ArrayX2d::Zero(g.num_columns(), 2);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.inside(i, j)) continue;
      const double pc = pressure(r(g.column(i, j)), ctx2.params);
      for (int d = 0; d < 2; ++d) {
        const int di = d == 0 ? 1 : 0, dj = d == 1 ? 1 : 0;
        const double h = d == 0 ? g.hx : g.hy;
        const bool up = g.inside(i + di, j + dj), dn = g.inside(i - di, j - dj);
        const double pu = up ? pressure(r(g.column(i + di, j + dj)), ctx2.params) : pc;
        const double pd = dn ? pressure(r(g.column(i - di, j - dj)), ctx2.params) : pc;
        // centred inside, one-sided next to the wall
        const double span = (up ? h : 0.0) + (dn ? h : 0.0);
        out(g.column(i, j), d) = span > 0.0 ? (pu - pd) / span : 0.0;
      }
    }
  return out;
}

Remainders remainder_decomposition(const HydroContext& ctx3, const HydroContext& ctx2, const FluidState3& s,
                                   const RadField& I, const TargetSnapshot& target,
                                   const Eigen::ArrayX3d* gravity3, const Eigen::ArrayX3d* gravity2) {
  if (!target.has_time_derivatives())
    throw std::invalid_argument("remainder_decomposition: target time derivatives are required");
  if (ctx3.planar || !ctx2.planar) throw std::invalid_argument("remainder_decomposition: context mismatch");
  const LayerGrid& g = ctx3.grid;
  const ModelParams& p = ctx3.params;
  const Opacities& opac = p.opacities;
  const int n = g.num_cells();
  const double vol = g.cell_volume();

  // target quantities on omega
  const FluidState3 t2 = to_state3(target.state);
  require_positive_target(t2.rho, ctx2.grid, 1);
  const Eigen::ArrayXXd gradV2 = cell_gradients(ctx2, t2.u);
  const Eigen::ArrayX3d divSV2 = viscous_divergence(ctx2, t2.u);
  const Eigen::ArrayX2d gradp2 = pressure_gradient_2d(ctx2, target.state.r);
  Eigen::ArrayX3d grav2_local;
  if (!gravity2) {
    grav2_local = gravity_force(ctx2, target.state.r);
    gravity2 = &grav2_local;
  }
  Eigen::ArrayX3d grav3_local;
  if (!gravity3) {
    grav3_local = gravity_force(ctx3, s.rho);
    gravity3 = &grav3_local;
  }

  // extrusions
  const Eigen::ArrayXd r = extrude(g, target.state.r);
  const Eigen::ArrayXd drdt = extrude(g, target.dr_dt);
  Eigen::ArrayX3d V = Eigen::ArrayX3d::Zero(n, 3), dVdt = Eigen::ArrayX3d::Zero(n, 3);
  for (int d = 0; d < 2; ++d) {
    V.col(d) = extrude(g, target.state.w.col(d));
    dVdt.col(d) = extrude(g, target.dw_dt.col(d));
  }
  const Eigen::ArrayXXd gradV = [&] {
    Eigen::ArrayXXd out(n, 9);
    for (int q = 0; q < 9; ++q) out.col(q) = extrude(g, gradV2.col(q));
    return out;
  }();
  const Eigen::ArrayX3d divSV = extrude3(g, divSV2);
  const Eigen::ArrayX3d gradp = extrude3(g, gradp2);
  const Eigen::ArrayX3d grav2 = extrude3(g, *gravity2);
  const Eigen::ArrayX3d cent = centrifugal_force(ctx3);
  const bool rad = I.I.cols() > 0 && target.J.I.cols() > 0;
  RadField J;
  Eigen::ArrayX3d SF_rho = Eigen::ArrayX3d::Zero(n, 3), SF_r = Eigen::ArrayX3d::Zero(n, 3);
  if (rad) {
    J = RadField::zeros(n, target.J.ndirs, target.J.nbands);
    for (Eigen::Index q = 0; q < target.J.I.cols(); ++q) J.I.col(q) = extrude(g, target.J.I.col(q));
    if (ctx3.config.radiation_momentum) {
      SF_rho = radiative_momentum(I, s.rho, ctx3.quad, opac, false);
      SF_r = radiative_momentum(J, r, ctx3.quad, opac, false);
    }
  }
  const Eigen::ArrayXXd gradU = cell_gradients(ctx3, s.u);

  const double chi = p.chi;
  auto cross = [chi](const Eigen::Vector3d& v) { return Eigen::Vector3d(-chi * v(1), chi * v(0), 0.0); };

  Remainders out;
  std::array<double, 8> R{};
  std::array<double, 6> T{};
  double grav_target = 0.0;
  for (int c = 0; c < n; ++c) {
    if (!g.mask[c % g.num_columns()]) continue;
    const double rho = std::max(s.rho(c), 0.0), rc = r(c);
    const Eigen::Vector3d u = s.u.row(c).transpose().matrix(), v = V.row(c).transpose().matrix();
    const Eigen::Vector3d vmu = v - u;
    const Eigen::Matrix3d GV = gradient_at(gradV, c), GU = gradient_at(gradU, c);
    const Eigen::Vector3d dv = dVdt.row(c).transpose().matrix();
    const Eigen::Vector3d gp = gradp.row(c).transpose().matrix();
    const Eigen::Vector3d cf = cent.row(c).transpose().matrix();
    const Eigen::Vector3d sfr = SF_r.row(c).transpose().matrix(), sfrho = SF_rho.row(c).transpose().matrix();
    const Eigen::Vector3d phi3 = gravity3->row(c).transpose().matrix();
    const Eigen::Vector3d material = dv + GV * v;  // d_t V + V . grad V
    const double dtp = pressure_derivative(rc, p) * drdt(c);
    const double divV = GV.trace();

    R[0] += vol * rho * (GV * (u - v)).dot(vmu);
    R[1] += vol * (rho - rc) * material.dot(vmu);
    R[2] += vol * (rc * material - divSV.row(c).transpose().matrix() + gp + rc * cross(v) - rc * cf - sfr).dot(vmu);
    R[3] += vol * ((1.0 - rho / rc) * dtp - (rho / rc) * u.dot(gp) - pressure(rho, p) * divV - gp.dot(vmu));
    R[4] += vol * (rho * cross(u) - rc * cross(v) - (rho - rc) * cf - sfrho + sfr).dot(vmu);
    R[5] += -vol * rho * phi3.dot(vmu);
    grav_target += vol * rc * grav2.row(c).transpose().matrix().dot(vmu);

    T[0] += vol * rho * (dv + GV * u).dot(vmu);
    T[1] += vol * contract(stress3(GV, p), GV - GU);
    T[2] += vol * ((1.0 - rho / rc) * dtp - (rho / rc) * u.dot(gp) - pressure(rho, p) * divV);
    T[3] += vol * (-rho * cross(u) + rho * cf + rho * phi3 + sfrho).dot(-vmu);
  }

  if (rad) {
    const int nd = I.ndirs;
    const double wsum = ctx3.quad.weight_sum();
    Eigen::ArrayXd r7 = Eigen::ArrayXd::Zero(n), r8 = Eigen::ArrayXd::Zero(n);
    for (int c = 0; c < n; ++c) {
      if (!g.mask[c % g.num_columns()]) continue;
      const double rho = std::max(s.rho(c), 0.0), rc = r(c);
      const double sar = sigma_a(rho, opac), sat = sigma_a(rc, opac);
      const double ssr = sigma_s(rho, opac), sst = sigma_s(rc, opac);
      for (int b = 0; b < I.nbands; ++b) {
        const double wb = opac.bands[b].weight, nu = opac.bands[b].node;
        const double Br = planck_b(nu, rho, opac), Bt = planck_b(nu, rc, opac);
        const auto Ir = I.I.row(c).segment(static_cast<Eigen::Index>(b) * nd, nd);
        const auto Jr = J.I.row(c).segment(static_cast<Eigen::Index>(b) * nd, nd);
        const double Imean = (ctx3.quad.w.transpose() * Ir).sum() / wsum;
        const double Jmean = (ctx3.quad.w.transpose() * Jr).sum() / wsum;
        double a7 = 0.0, a8 = 0.0;
        for (int m = 0; m < nd; ++m) {
          const double diff = Ir(m) - Jr(m);
          a7 += ctx3.quad.w(m) * (sar * (Br - Ir(m)) - sat * (Bt - Jr(m))) * diff;
          a8 += ctx3.quad.w(m) * (ssr * (Imean - Ir(m)) - sst * (Jmean - Jr(m))) * diff;
        }
        r7(c) += wb * a7;
        r8(c) += wb * a8;
      }
    }
    R[6] = r7.sum() * vol;
    R[7] = r8.sum() * vol;
  }
  T[4] = R[6];
  T[5] = R[7];

  out.R = R;
  out.direct = T;
  for (double x : R) out.sum += x;
  for (double x : T) out.direct_sum += x;
  out.gravity_target = grav_target;
  out.target_residual = R[2] - grav_target;
  return out;
}

Coefficients target_coefficients(const HydroContext& ctx2, const TargetSnapshot& target) {
  const LayerGrid& g = ctx2.grid;
  const FluidState3 t2 = to_state3(target.state);
  const Eigen::ArrayXXd G = cell_gradients(ctx2, t2.u);
  const Eigen::ArrayX2d gp = pressure_gradient_2d(ctx2, target.state.r);
  Coefficients k;
  double wmax = 0.0;
  for (int c = 0; c < g.num_columns(); ++c) {
    if (!g.mask[c]) continue;
    const Eigen::Matrix3d Gc = gradient_at(G, c);
    k.A = std::max(k.A, Gc.norm());
    k.D = std::max(k.D, std::abs(Gc.trace()));
    k.C = std::max(k.C, gp.row(c).matrix().norm() / target.state.r(c));
    wmax = std::max(wmax, t2.u.row(c).matrix().norm());
    if (target.has_time_derivatives()) {
      const Eigen::Vector3d w = t2.u.row(c).transpose().matrix();
      Eigen::Vector3d mat = Gc * w;
      mat(0) += target.dw_dt(c, 0);
      mat(1) += target.dw_dt(c, 1);
      k.B = std::max(k.B, mat.norm());
    }
    if (target.J.I.cols() > 0) k.F = std::max(k.F, target.J.I.row(c).abs().maxCoeff());
  }
  k.E = 1.0 + wmax;
  return k;
}

GronwallResult gronwall_envelope(const std::vector<double>& t, const std::vector<double>& entropy,
                                 const std::vector<double>& K, const std::vector<double>& h, double rel_tol) {
  const size_t n = t.size();
  if (entropy.size() != n || K.size() != n || h.size() != n)
    throw std::invalid_argument("gronwall_envelope: series lengths differ");
  for (double k : K)
    if (!(k >= 0.0)) throw std::invalid_argument("gronwall_envelope: K must be non-negative");
  GronwallResult out;
  out.envelope.resize(n);
  // cumulative int_0^t K
  std::vector<double> IK(n, 0.0);
  for (size_t i = 1; i < n; ++i) IK[i] = IK[i - 1] + 0.5 * (K[i] + K[i - 1]) * (t[i] - t[i - 1]);
  for (size_t i = 0; i < n; ++i) {
    double q = 0.0;
    for (size_t j = 1; j <= i; ++j) {
      const double f1 = h[j] * K[j] * std::exp(IK[i] - IK[j]);
      const double f0 = h[j - 1] * K[j - 1] * std::exp(IK[i] - IK[j - 1]);
      q += 0.5 * (f0 + f1) * (t[j] - t[j - 1]);
    }
    out.envelope[i] = h[i] + q;
    const double env = out.envelope[i];
    if (env > 0.0) out.worst_ratio = std::max(out.worst_ratio, entropy[i] / env);
    else if (entropy[i] > 0.0) out.worst_ratio = std::numeric_limits<double>::infinity();
    if (entropy[i] > env + rel_tol * std::abs(env) + 1e-300 && out.first_violation < 0) {
      out.first_violation = static_cast<int>(i);
      out.holds = false;
    }
  }
  return out;
}

double gradient_gap(const HydroContext& ctx3, const Eigen::ArrayX3d& u, const Eigen::ArrayX3d& V) {
  const Eigen::ArrayXXd G = cell_gradients(ctx3, u - V);
  const Eigen::ArrayXd sq = G.square().rowwise().sum();
  return ctx3.planar ? integrate2(ctx3.grid, sq) : integrate3(ctx3.grid, sq);
}

double EntropyReport::max_entropy() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.E.total);
  return m;
}

double EntropyReport::final_entropy() const { return rows.empty() ? 0.0 : rows.back().E.total; }

}  // namespace thinlayer
