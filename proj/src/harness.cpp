#include "thinlayer/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "thinlayer/constitutive.hpp"
#include "thinlayer/io.hpp"

namespace thinlayer {

std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::Uniform: return "uniform";
    case Recipe::GaussianBump: return "gaussian-bump";
    case Recipe::RotatingPatch: return "rotating-patch";
  }
  return "?";
}

Recipe recipe_from_string(const std::string& s) {
  if (s == "uniform") return Recipe::Uniform;
  if (s == "gaussian-bump") return Recipe::GaussianBump;
  if (s == "rotating-patch") return Recipe::RotatingPatch;
  throw std::invalid_argument("unknown recipe '" + s + "'");
}

void ScenarioConfig::validate() const {
  if (nx <= 0 || ny <= 0 || nz <= 0) throw std::invalid_argument("config: grid dimensions must be positive");
  if (eps.empty()) throw std::invalid_argument("config: empty eps list");
  for (size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0)) throw std::invalid_argument("config: eps must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw std::invalid_argument("config: eps list must be strictly decreasing");
  }
  if (!(t_end > 0)) throw std::invalid_argument("config: t_end must be positive");
  for (double c : {cfl_acoustic, cfl_viscous, cfl_radiation})
    if (!(c > 0 && c <= 1)) throw std::invalid_argument("config: CFL numbers must lie in (0,1]");
  if (!(alpha >= 0) || !(alpha * eps.front() < 1.0))
    throw std::invalid_argument("config: need 0 <= alpha * eps < 1 for a positive density");
  if (n_polar <= 0 || n_polar % 2 || n_azimuth <= 0 || n_azimuth % 4)
    throw std::invalid_argument("config: n_polar must be even and n_azimuth a multiple of 4");
  if (diag_stride < 1) throw std::invalid_argument("config: diag_stride must be >= 1");
  if (!(bump_width > 0) || !(bump_amplitude > -1.0)) throw std::invalid_argument("config: bad bump parameters");
  if (params.regime != regime) throw std::invalid_argument("config: params.regime differs from regime");
  params.validate();
}

ScenarioConfig ScenarioConfig::headline(FroudeRegime r) {
  ScenarioConfig c;
  c.regime = r;
  c.params = ModelParams::for_regime(r);
  return c;
}

nlohmann::json to_json(const ScenarioConfig& c) {
  const ModelParams& p = c.params;
  return {{"nx", c.nx},
          {"ny", c.ny},
          {"nz", c.nz},
          {"eps", c.eps},
          {"regime", to_string(c.regime)},
          {"params",
           {{"mu", p.mu},
            {"xi", p.xi},
            {"a", p.a},
            {"gamma", p.gamma},
            {"chi", p.chi},
            {"G", p.G},
            {"eta", p.eta},
            {"centrifugal", to_string(p.centrifugal_form)},
            {"sigma_a0", p.opacities.sigma_a0},
            {"sigma_s0", p.opacities.sigma_s0},
            {"planck_b0", p.opacities.planck_b0}}},
          {"recipe", to_string(c.recipe)},
          {"alpha", c.alpha},
          {"bump_amplitude", c.bump_amplitude},
          {"bump_width", c.bump_width},
          {"bump_x", c.bump_x},
          {"bump_y", c.bump_y},
          {"patch_omega", c.patch_omega},
          {"noise", c.noise},
          {"t_end", c.t_end},
          {"cfl_acoustic", c.cfl_acoustic},
          {"cfl_viscous", c.cfl_viscous},
          {"cfl_radiation", c.cfl_radiation},
          {"radiation", c.radiation},
          {"n_polar", c.n_polar},
          {"n_azimuth", c.n_azimuth},
          {"lateral", c.lateral == LateralRadiation::Absorbing ? "absorbing" : "specular"},
          {"source_mass", c.source_mass},
          {"source_radius", c.source_radius},
          {"source_nodes", c.source_nodes},
          {"diag_stride", c.diag_stride},
          {"out_dir", c.out_dir},
          {"seed", c.seed}};
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
  FroudeRegime regime = FroudeRegime::One;
  if (j.contains("regime")) regime = regime_from_string(j.at("regime").get<std::string>());
  ScenarioConfig c = ScenarioConfig::headline(regime);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (k == "regime") continue;
    if (k == "nx") c.nx = v;
    else if (k == "ny") c.ny = v;
    else if (k == "nz") c.nz = v;
    else if (k == "eps") c.eps = v.get<std::vector<double>>();
    else if (k == "recipe") c.recipe = recipe_from_string(v.get<std::string>());
    else if (k == "alpha") c.alpha = v;
    else if (k == "bump_amplitude") c.bump_amplitude = v;
    else if (k == "bump_width") c.bump_width = v;
    else if (k == "bump_x") c.bump_x = v;
    else if (k == "bump_y") c.bump_y = v;
    else if (k == "patch_omega") c.patch_omega = v;
    else if (k == "noise") c.noise = v;
    else if (k == "t_end") c.t_end = v;
    else if (k == "cfl_acoustic") c.cfl_acoustic = v;
    else if (k == "cfl_viscous") c.cfl_viscous = v;
    else if (k == "cfl_radiation") c.cfl_radiation = v;
    else if (k == "radiation") c.radiation = v;
    else if (k == "n_polar") c.n_polar = v;
    else if (k == "n_azimuth") c.n_azimuth = v;
    else if (k == "lateral") {
      const std::string s = v;
      if (s == "absorbing") c.lateral = LateralRadiation::Absorbing;
      else if (s == "specular") c.lateral = LateralRadiation::Specular;
      else throw std::invalid_argument("config: lateral must be absorbing or specular");
    } else if (k == "source_mass") c.source_mass = v;
    else if (k == "source_radius") c.source_radius = v;
    else if (k == "source_nodes") c.source_nodes = v;
    else if (k == "diag_stride") c.diag_stride = v;
    else if (k == "out_dir") c.out_dir = v;
    else if (k == "seed") c.seed = v;
    else if (k == "params") {
      ModelParams& p = c.params;
      for (auto pt = v.begin(); pt != v.end(); ++pt) {
        const std::string& pk = pt.key();
        const auto& pv = pt.value();
        if (pk == "mu") p.mu = pv;
        else if (pk == "xi") p.xi = pv;
        else if (pk == "a") p.a = pv;
        else if (pk == "gamma") p.gamma = pv;
        else if (pk == "chi") p.chi = pv;
        else if (pk == "G") p.G = pv;
        else if (pk == "eta") p.eta = pv;
        else if (pk == "centrifugal") p.centrifugal_form = centrifugal_from_string(pv.get<std::string>());
        else if (pk == "sigma_a0") p.opacities.sigma_a0 = pv;
        else if (pk == "sigma_s0") p.opacities.sigma_s0 = pv;
        else if (pk == "planck_b0") p.opacities.planck_b0 = pv;
        else throw std::invalid_argument("config: unknown params key '" + pk + "'");
      }
    } else {
      throw std::invalid_argument("config: unknown key '" + k + "'");
    }
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  return config_from_json(nlohmann::json::parse(f, nullptr, true, true));
}

namespace {

// zero on the walls of omega
double wall_window(double x, double y) {
  const double c = std::cos(M_PI * x) * std::cos(M_PI * y);
  return c * c;
}

}  // namespace

WellPrepared build_well_prepared(const ScenarioConfig& cfg, const LayerGrid& grid, const AngularQuadrature& quad) {
  cfg.validate();
  const LayerGrid g2 = grid.planar();
  const int nc = grid.num_columns();
  WellPrepared w;
  w.state2 = FluidState2::zeros(g2);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const int c = grid.column(i, j);
      const double x = grid.xc(i), y = grid.yc(j);
      const double s2 = 2.0 * cfg.bump_width * cfg.bump_width;
      switch (cfg.recipe) {
        case Recipe::Uniform:
          w.state2.r(c) = 1.0;
          break;
        case Recipe::GaussianBump: {
          const double dx = x - cfg.bump_x, dy = y - cfg.bump_y;
          w.state2.r(c) = 1.0 + cfg.bump_amplitude * std::exp(-(dx * dx + dy * dy) / s2);
          break;
        }
        case Recipe::RotatingPatch: {
          w.state2.r(c) = 1.0 + cfg.bump_amplitude * std::exp(-(x * x + y * y) / s2);
          const double win = wall_window(x, y);
          w.state2.w(c, 0) = -cfg.patch_omega * y * win;
          w.state2.w(c, 1) = cfg.patch_omega * x * win;
          break;
        }
      }
      if (!grid.mask[c]) {
        w.state2.r(c) = 1.0;
        w.state2.w.row(c).setZero();
      }
    }
  const Opacities& opac = cfg.params.opacities;
  w.rad2 = cfg.radiation ? equilibrium_field(w.state2.r, quad, opac) : RadField::zeros(nc, 0, opac.num_bands());

  auto ex = extrude_2d_to_3d(w.state2, w.rad2, grid);
  w.state3 = std::move(ex.first);
  w.rad3 = std::move(ex.second);

  // rho_k = r (1 + alpha eps cos(pi x3_k)); the upper half is the exact complement 2r - rho, so the
  // column average reproduces r without rounding.
  const double amp = cfg.alpha * grid.eps;
  if (amp > 0.0) {
    for (int k = 0; k < grid.nz / 2; ++k) {
      const int km = grid.nz - 1 - k;
      for (int c = 0; c < nc; ++c) {
        const double r = w.state2.r(c);
        const double lo = r + amp * r * std::cos(M_PI * grid.zc(k));
        w.state3.rho(k * nc + c) = lo;
        w.state3.rho(km * nc + c) = 2.0 * r - lo;
      }
    }
  }
  if (cfg.noise > 0.0) {
    // antisymmetric in x3 so the column mean of u is unchanged
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 0; k < grid.nz / 2; ++k) {
      const int km = grid.nz - 1 - k;
      for (int c = 0; c < nc; ++c) {
        if (!grid.mask[c]) continue;
        for (int d = 0; d < 2; ++d) {
          const double v = cfg.noise * grid.eps * U(rng);
          w.state3.u(k * nc + c, d) += v;
          w.state3.u(km * nc + c, d) -= v;
        }
      }
    }
  }
  return w;
}

namespace {

// Centred differences inside, one-sided next to the wall.
Eigen::ArrayX2d scalar_gradient(const LayerGrid& g, const Eigen::ArrayXd& f) {
  Eigen::ArrayX2d out = Eigen::ArrayX2d::Zero(g.num_columns(), 2);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.inside(i, j)) continue;
      const int c = g.column(i, j);
      for (int d = 0; d < 2; ++d) {
        const int di = d == 0, dj = d == 1;
        const double h = d == 0 ? g.hx : g.hy;
        const bool up = g.inside(i + di, j + dj), dn = g.inside(i - di, j - dj);
        const double fu = up ? f(g.column(i + di, j + dj)) : f(c);
        const double fd = dn ? f(g.column(i - di, j - dj)) : f(c);
        const double span = (up ? h : 0.0) + (dn ? h : 0.0);
        out(c, d) = span > 0 ? (fu - fd) / span : 0.0;
      }
    }
  return out;
}

double lp_norm(const LayerGrid& g, const Eigen::ArrayXd& pointwise, double p) {
  return std::pow(integrate2(g, pointwise.abs().pow(p)), 1.0 / p);
}

}  // namespace

InitialNorms initial_data_norms(const HydroContext& ctx2, const FluidState2& s, const RadField& J) {
  const LayerGrid& g = ctx2.grid;
  const ModelParams& p = ctx2.params;
  const Opacities& opac = p.opacities;
  const int n = g.num_columns();
  const double area = integrate2(g, Eigen::ArrayXd::Ones(n));
  const double rbar = integrate2(g, s.r) / area;
  const double alpha = 4.0;

  double rinf = 0.0;
  for (int c = 0; c < n; ++c)
    if (g.mask[c]) rinf = std::max(rinf, std::abs(s.r(c) - rbar));

  const FluidState3 s3 = to_state3(s);
  const Eigen::ArrayXXd G = cell_gradients(ctx2, s3.u);
  const Eigen::ArrayXd wsq = s.w.square().rowwise().sum();
  const Eigen::ArrayXd gwsq = G.square().rowwise().sum();
  const double w_h1 = std::sqrt(integrate2(g, wsq) + integrate2(g, gwsq));

  // E_R(J0)(x) - E_R(B(rbar))
  Eigen::ArrayXd er = Eigen::ArrayXd::Zero(n);
  double erbar = 0.0;
  if (J.I.cols() > 0) {
    for (int b = 0; b < J.nbands; ++b) {
      for (int m = 0; m < J.ndirs; ++m) er += opac.bands[b].weight * ctx2.quad.w(m) * J.I.col(J.col(m, b));
      erbar += opac.bands[b].weight * ctx2.quad.weight_sum() * planck_b(opac.bands[b].node, rbar, opac);
    }
    er -= erbar;
  }
  const Eigen::ArrayX2d ger = scalar_gradient(g, er);
  const double er_h1 = std::sqrt(integrate2(g, er.square()) + integrate2(g, ger.square().rowwise().sum()));

  // T0 = (mu Lap w + (xi + mu/3) grad div w - grad p(r)) / r
  const Eigen::ArrayX3d divS = viscous_divergence(ctx2, s3.u);
  const Eigen::ArrayX2d gp = pressure_gradient_2d(ctx2, s.r);
  Eigen::ArrayX2d T(n, 2);
  for (int c = 0; c < n; ++c)
    for (int d = 0; d < 2; ++d) T(c, d) = g.mask[c] ? (divS(c, d) - gp(c, d)) / s.r(c) : 0.0;
  const double t_l2 = std::sqrt(integrate2(g, T.square().rowwise().sum()));

  Eigen::ArrayXd vort(n);
  for (int c = 0; c < n; ++c) {
    const Eigen::Matrix3d Gc = gradient_at(G, c);
    vort(c) = (Gc - Gc.transpose()).norm();
  }
  const double v_l4 = lp_norm(g, vort, 4.0);

  InitialNorms out;
  out.e0 = rinf + w_h1 + er_h1 + t_l2 + v_l4;

  const Eigen::ArrayX2d gr = scalar_gradient(g, s.r);
  const Eigen::ArrayXd gr_abs = gr.square().rowwise().sum().sqrt();
  const double gr_l2 = std::sqrt(integrate2(g, gr_abs.square()));
  const double gr_la = lp_norm(g, gr_abs, alpha);
  const Eigen::ArrayX2d gT1 = scalar_gradient(g, T.col(0)), gT2 = scalar_gradient(g, T.col(1));
  const double gT_l2 = std::sqrt(integrate2(g, gT1.square().rowwise().sum() + gT2.square().rowwise().sum()));
  double gJ = 0.0;
  for (int b = 0; b < J.nbands && J.I.cols() > 0; ++b)
    for (int m = 0; m < J.ndirs; ++m) {
      const Eigen::ArrayX2d gj = scalar_gradient(g, J.I.col(J.col(m, b)));
      gJ += opac.bands[b].weight * ctx2.quad.w(m) * integrate2(g, gj.square().rowwise().sum());
    }
  // the L^alpha norm of grad r0 appears twice in the definition
  out.E0 = out.e0 + gr_l2 + gr_la + gT_l2 + std::sqrt(gJ) + gr_la;
  return out;
}

ExternalSource scenario_source(const ScenarioConfig& cfg) {
  if (cfg.regime != FroudeRegime::One || cfg.source_mass == 0.0) return ExternalSource::none();
  return ExternalSource::bump(Eigen::Vector3d::Zero(), cfg.source_radius, cfg.source_mass, cfg.source_nodes);
}

HydroStep3Config scenario_step_config(const ScenarioConfig& cfg) {
  HydroStep3Config h;
  h.cfl_acoustic = cfg.cfl_acoustic;
  h.cfl_viscous = cfg.cfl_viscous;
  h.cfl_radiation = cfg.cfl_radiation;
  h.transport.lateral = cfg.lateral;
  h.transport.cfl = cfg.cfl_radiation;
  h.radiation_momentum = cfg.radiation;
  return h;
}

namespace {

double active_min(const LayerGrid& g, const Eigen::ArrayXd& r) {
  double m = std::numeric_limits<double>::infinity();
  for (int c = 0; c < g.num_columns(); ++c)
    if (g.mask[c]) m = std::min(m, r(c));
  return m;
}

double active_max(const LayerGrid& g, const Eigen::ArrayXd& r) {
  double m = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < g.num_columns(); ++c)
    if (g.mask[c]) m = std::max(m, r(c));
  return m;
}

struct Target2 {
  FluidState2 s;
  RadField J;
};

TargetSnapshot snapshot(double t, const Target2& prev, const Target2& cur, const Target2& next, bool has_prev,
                        bool has_next, double dt) {
  TargetSnapshot ts;
  ts.t = t;
  ts.state = cur.s;
  ts.J = cur.J;
  if (has_prev && has_next) {
    ts.dr_dt = (next.s.r - prev.s.r) / (2.0 * dt);
    ts.dw_dt = (next.s.w - prev.s.w) / (2.0 * dt);
  } else if (has_next) {
    ts.dr_dt = (next.s.r - cur.s.r) / dt;
    ts.dw_dt = (next.s.w - cur.s.w) / dt;
  } else {
    ts.dr_dt = (cur.s.r - prev.s.r) / dt;
    ts.dw_dt = (cur.s.w - prev.s.w) / dt;
  }
  return ts;
}

double boundary_min(const RadField& rad, const LayerGrid& g, const AngularQuadrature& quad, const Opacities& opac,
                    LateralRadiation lateral, bool planar) {
  if (rad.I.cols() == 0) return 0.0;
  return boundary_flux_check(rad, g, quad, opac, lateral, planar).min;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg, double eps) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  ScenarioResult res;
  res.eps = eps;
  res.regime = cfg.regime;

  const LayerGrid grid = LayerGrid::unit_square(cfg.nx, cfg.ny, cfg.nz, eps);
  const AngularQuadrature quad = AngularQuadrature::product(cfg.n_polar, cfg.n_azimuth);
  const ModelParams& params = cfg.params;
  const Opacities& opac = params.opacities;
  const ExternalSource src = scenario_source(cfg);
  const HydroStep3Config scfg = scenario_step_config(cfg);
  const HydroContext ctx3 = HydroContext::make3d(grid, params, quad, src, scfg);
  const HydroContext ctx2 = HydroContext::make2d(grid, params, quad, src, scfg);
  const LayerGrid& g2 = ctx2.grid;

  WellPrepared wp = build_well_prepared(cfg, grid, quad);
  res.norms = initial_data_norms(ctx2, wp.state2, wp.rad2);

  // one fixed dt for both solvers
  const double dt0 = std::min(stable_dt3d(wp.state3, ctx3), stable_dt2d(wp.state2, ctx2));
  res.steps = static_cast<int>(std::ceil(cfg.t_end / dt0 - 1e-9));
  res.dt = cfg.t_end / res.steps;
  const double dt = res.dt;
  const double h = grid.h_max();

  auto finish = [&] {
    res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
  };

  // 2D pre-pass for the essential/residual thresholds
  try {
    Target2 cur{wp.state2, wp.rad2};
    res.rho_lo = active_min(g2, cur.s.r);
    res.rho_hi = active_max(g2, cur.s.r);
    for (int n = 0; n < res.steps; ++n) {
      Coupled2 a = advance2d(cur.s, cur.J, ctx2, dt, n * dt);
      cur = Target2{std::move(a.state), std::move(a.rad)};
      res.rho_lo = std::min(res.rho_lo, active_min(g2, cur.s.r));
      res.rho_hi = std::max(res.rho_hi, active_max(g2, cur.s.r));
    }
  } catch (const std::exception& e) {
    res.failure = std::string("2D pre-pass: ") + e.what();
    return finish();
  }
  res.lb_constant = fit_lower_bound_constant(params, res.rho_lo, res.rho_hi);
  res.lb_sample_margin = sample_lower_bound(params, res.rho_lo, res.rho_hi, res.lb_constant).worst_margin;
  res.lb_snapshot_margin = std::numeric_limits<double>::infinity();

  FluidState3 s3 = wp.state3;
  RadField I3 = wp.rad3;
  Target2 prev, cur{wp.state2, wp.rad2}, next;
  const double M3 = integrate3(grid, s3.rho), M2 = integrate2(g2, cur.s.r);
  const EnergyLedger e3_init = energy_snapshot(ctx3, s3.rho, s3.u, I3);
  const EnergyLedger e2_init = energy_snapshot(ctx2, to_state3(cur.s).rho, to_state3(cur.s).u, cur.J);
  std::vector<RadiationL2Entry> l2s3{{0.0, radiation_half_l2(I3, grid, quad, opac, false), 0.0, 0.0}};
  std::vector<RadiationL2Entry> l2s2{{0.0, radiation_half_l2(cur.J, g2, quad, opac, true), 0.0, 0.0}};
  res.dg_min = std::min(boundary_min(I3, grid, quad, opac, cfg.lateral, false),
                        boundary_min(cur.J, g2, quad, opac, cfg.lateral, true));

  std::vector<double> tK, tE, tKv, tH3R6;
  double diss3 = 0.0, src3 = 0.0;
  const double energy_tol = 10.0 * (dt + h) * std::abs(e3_init.total());
  double w12_prev = 0.0, t_prev = 0.0;
  bool first_sample = true;

  try {
    for (int n = 0; n <= res.steps; ++n) {
      const double t = n * dt;
      const Eigen::ArrayX3d grav3 = gravity_force(ctx3, s3.rho);
      const Eigen::ArrayX3d grav2 = gravity_force(ctx2, cur.s.r);
      Coupled2 a2;
      const bool has_next = n < res.steps;
      if (has_next) {
        a2 = advance2d(cur.s, cur.J, ctx2, dt, t, &grav2);
        next = Target2{a2.state, a2.rad};
      }

      if (n % cfg.diag_stride == 0 || n == res.steps) {
        const TargetSnapshot ts = snapshot(t, prev, cur, next, n > 0, has_next, dt);
        auto ex = extrude_2d_to_3d(cur.s, cur.J, grid);
        EntropyRow row;
        row.t = t;
        row.E = relative_entropy(s3, I3, ex.first, ex.second, grid, params, quad);
        const LowerBoundCheck lb = entropy_lower_bound_check(s3, I3, ex.first, ex.second, grid, params, quad,
                                                             res.rho_lo, res.rho_hi, res.lb_constant);
        row.lb_margin = lb.margin;
        res.lb_snapshot_margin = std::min(res.lb_snapshot_margin, lb.margin);
        const Remainders R = remainder_decomposition(ctx3, ctx2, s3, I3, ts, &grav3, &grav2);
        row.R = R.R;
        res.max_split_gap = std::max(res.max_split_gap, std::abs(R.sum - R.direct_sum));
        res.max_target_residual = std::max(res.max_target_residual, std::abs(R.target_residual));
        const Coefficients K = target_coefficients(ctx2, ts);
        res.max_grad_w = std::max(res.max_grad_w, K.A);
        row.dg_min_flux = std::min(boundary_min(I3, grid, quad, opac, cfg.lateral, false),
                                   boundary_min(cur.J, g2, quad, opac, cfg.lateral, true));
        row.energy_violation = 0.0;
        if (!res.ledger3.empty()) {
          const EnergyLedger& L = res.ledger3.back();
          row.energy_violation = std::max(0.0, L.total() + diss3 - (e3_init.total() + src3) - energy_tol);
        }
        const double w12 = gradient_gap(ctx3, s3.u, ex.first.u);
        if (!first_sample) res.w12_gap += 0.5 * (w12 + w12_prev) * (t - t_prev);
        w12_prev = w12;
        t_prev = t;
        first_sample = false;
        res.report.rows.push_back(row);
        tK.push_back(t);
        tE.push_back(row.E.total);
        tKv.push_back(K.K());
        tH3R6.push_back(std::abs(R.R[2] + R.R[5]));
      }
      if (!has_next) break;

      if (dt > 2.0 * stable_dt3d(s3, ctx3)) {
        std::ostringstream os;
        os << "fixed dt " << dt << " exceeds twice the stable step at t=" << t;
        throw StepFailure(os.str());
      }
      Coupled3 a3 = advance3d(s3, I3, ctx3, dt, t, &grav3);
      s3 = std::move(a3.state);
      I3 = std::move(a3.rad);
      res.ledger3.push_back(a3.ledger);
      diss3 += a3.ledger.dissipation;
      src3 += a3.ledger.work() + a3.ledger.radiation_source;
      res.total_halvings += a3.ledger.halvings + a2.ledger.halvings;
      res.clip_mass += a3.ledger.clip_mass + a2.ledger.clip_mass;
      l2s3.push_back({t + dt, radiation_half_l2(I3, grid, quad, opac, false), a3.rad_diag.l2_dissipation,
                      a3.rad_diag.b2_source});
      l2s2.push_back({t + dt, radiation_half_l2(next.J, g2, quad, opac, true), a2.rad_diag.l2_dissipation,
                      a2.rad_diag.b2_source});
      res.ledger2.push_back(a2.ledger);
      res.mass_drift3 = std::max(res.mass_drift3, std::abs(integrate3(grid, s3.rho) - M3) / M3);
      res.mass_drift2 = std::max(res.mass_drift2, std::abs(integrate2(g2, next.s.r) - M2) / M2);
      res.dg_min = std::min({res.dg_min, boundary_min(I3, grid, quad, opac, cfg.lateral, false),
                             boundary_min(next.J, g2, quad, opac, cfg.lateral, true)});
      prev = std::move(cur);
      cur = std::move(next);
      next = Target2{};
      res.steps_done = n + 1;
    }
    res.completed = true;
  } catch (const std::exception& e) {
    res.failure = e.what();
  }

  res.energy3 = energy_monitor(e3_init, res.ledger3, h);
  res.energy2 = energy_monitor(e2_init, res.ledger2, g2.h_max());
  res.l2_3 = radiation_l2_energy(l2s3);
  res.l2_2 = radiation_l2_energy(l2s2);

  // Gronwall envelope with h(t) = E(0) + int |R3 + R6|
  if (!tE.empty()) {
    std::vector<double> hs(tE.size());
    hs[0] = tE[0];
    for (size_t i = 1; i < hs.size(); ++i) hs[i] = hs[i - 1] + 0.5 * (tH3R6[i] + tH3R6[i - 1]) * (tK[i] - tK[i - 1]);
    res.gronwall = gronwall_envelope(tK, tE, tKv, hs);
    for (size_t i = 0; i < res.report.rows.size(); ++i) res.report.rows[i].envelope = res.gronwall.envelope[i];
    res.report.envelope_holds = res.gronwall.holds;
    res.entropy0 = tE.front();
  }
  res.report.lower_bound_holds = res.lb_snapshot_margin >= 0.0 && res.lb_sample_margin >= 0.0;
  res.max_entropy = res.report.max_entropy();
  res.final_entropy = res.report.final_entropy();
  return finish();
}

namespace {

bool strictly_decreasing(const std::vector<double>& v) {
  for (size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

}  // namespace

SweepResult run_epsilon_sweep(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SweepResult s;
  std::vector<double> maxE, w12;
  s.all_completed = true;
  for (double e : cfg.eps) {
    s.entries.push_back(run_scenario(cfg, e));
    const auto& r = s.entries.back();
    s.all_completed = s.all_completed && r.completed;
    maxE.push_back(r.max_entropy);
    w12.push_back(r.w12_gap);
  }
  s.entropy_decreasing = strictly_decreasing(maxE);
  s.w12_decreasing = strictly_decreasing(w12);
  s.final_ratio = maxE.front() > 0 ? maxE.back() / maxE.front() : 0.0;
  s.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  s.verdict = s.all_completed && s.entropy_decreasing && s.w12_decreasing;
  return s;
}

// ---------------------------------------------------------------------------------------------
// manufactured solutions

double fitted_order(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw std::invalid_argument("fitted_order: need two or more levels");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (size_t i = 0; i < h.size(); ++i) {
    if (!(err[i] > 0)) return std::numeric_limits<double>::infinity();
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

struct HydroExact {
  bool constant = false;
  double r(double x, double y, double t) const {
    if (constant) return 1.0;
    const double xc = -0.1 + 0.5 * t;
    return 1.0 + 0.2 * std::exp(-((x - xc) * (x - xc) + y * y) / (2.0 * 0.1 * 0.1));
  }
  Eigen::Vector2d w(double x, double y, double t) const {
    if (constant) return Eigen::Vector2d::Zero();
    const double c = std::cos(M_PI * x) * std::cos(M_PI * y);
    return Eigen::Vector2d(0.2 * c, -0.1 * (1.0 + t) * c);
  }
};

// fourth-order central difference
double d1(const std::function<double(double)>& f, double x, double h = 1e-3) {
  return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h);
}

double d2(const std::function<double(double)>& f, double x, double h = 1e-3) {
  return (-f(x - 2 * h) + 16 * f(x - h) - 30 * f(x) + 16 * f(x + h) - f(x + 2 * h)) / (12 * h * h);
}

// Residual of the exact fields in the planar system without rotation, gravity or radiation.
void hydro_forcing(const HydroExact& ex, const ModelParams& p, double t, double x, double y, double& fm,
                   Eigen::Vector2d& fu) {
  auto r = [&](double xx, double yy, double tt) { return ex.r(xx, yy, tt); };
  auto wi = [&](int i, double xx, double yy, double tt) { return ex.w(xx, yy, tt)(i); };
  auto m = [&](int i, double xx, double yy, double tt) { return r(xx, yy, tt) * wi(i, xx, yy, tt); };
  fm = d1([&](double s) { return r(x, y, s); }, t) + d1([&](double s) { return m(0, s, y, t); }, x) +
       d1([&](double s) { return m(1, x, s, t); }, y);
  const double lam = p.xi + p.mu / 3.0;
  for (int i = 0; i < 2; ++i) {
    double v = d1([&](double s) { return m(i, x, y, s); }, t);
    v += d1([&](double s) { return m(i, s, y, t) * wi(0, s, y, t); }, x);
    v += d1([&](double s) { return m(i, x, s, t) * wi(1, x, s, t); }, y);
    v += i == 0 ? d1([&](double s) { return pressure(r(s, y, t), p); }, x)
                : d1([&](double s) { return pressure(r(x, s, t), p); }, y);
    const double lap = d2([&](double s) { return wi(i, s, y, t); }, x) + d2([&](double s) { return wi(i, x, s, t); }, y);
    // d_i div w
    auto divw = [&](double xx, double yy) {
      return d1([&](double s) { return wi(0, s, yy, t); }, xx) + d1([&](double s) { return wi(1, xx, s, t); }, yy);
    };
    const double gdiv = i == 0 ? d1([&](double s) { return divw(s, y); }, x) : d1([&](double s) { return divw(x, s); }, y);
    v -= p.mu * lap + lam * gdiv;
    fu(i) = v;
  }
}

double hydro_mms_error(int n, bool constant) {
  ModelParams p;
  p.chi = 0.0;
  p.G = 0.0;
  const LayerGrid g = LayerGrid::unit_square(n, n, 1, 1.0);
  const AngularQuadrature quad = AngularQuadrature::product(2, 4);
  HydroContext ctx = HydroContext::make2d(g, p, quad);
  HydroExact ex{constant};
  ctx.forcing = [ex, p](double t, const LayerGrid& gr, Eigen::ArrayXd& mass, Eigen::ArrayX3d& mom) {
    for (int j = 0; j < gr.ny; ++j)
      for (int i = 0; i < gr.nx; ++i) {
        const int c = gr.column(i, j);
        double fm;
        Eigen::Vector2d fu;
        hydro_forcing(ex, p, t, gr.xc(i), gr.yc(j), fm, fu);
        mass(c) = fm;
        mom(c, 0) = fu(0);
        mom(c, 1) = fu(1);
      }
  };
  FluidState2 s = FluidState2::zeros(ctx.grid);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int c = g.column(i, j);
      s.r(c) = ex.r(g.xc(i), g.yc(j), 0.0);
      s.w.row(c) = ex.w(g.xc(i), g.yc(j), 0.0).transpose().array();
    }
  const double T = 0.2;
  const int steps = static_cast<int>(std::ceil(T / stable_dt2d(s, ctx)));
  const double dt = T / steps;
  const RadField none;
  for (int k = 0; k < steps; ++k) s = step2d(s, none, ctx, dt, k * dt).first;
  Eigen::ArrayXd err(g.num_columns());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int c = g.column(i, j);
      const Eigen::Vector2d we = ex.w(g.xc(i), g.yc(j), T);
      const double dr = s.r(c) - ex.r(g.xc(i), g.yc(j), T);
      err(c) = dr * dr + (s.w(c, 0) - we(0)) * (s.w(c, 0) - we(0)) + (s.w(c, 1) - we(1)) * (s.w(c, 1) - we(1));
    }
  return std::sqrt(integrate2(ctx.grid, err));
}

double transport_mms_error(int n, bool constant) {
  Opacities opac;
  opac.sigma_a0 = 1.0;
  opac.sigma_s0 = 0.0;
  opac.planck_b0 = 0.0;
  const LayerGrid g = LayerGrid::unit_square(n, n, 1, 1.0);
  const AngularQuadrature quad = AngularQuadrature::product(4, 8);
  FluidState2 s = FluidState2::zeros(g);
  s.r.setConstant(1.0);
  const double sa = sigma_a(1.0, opac);
  const double width = 0.1, T = 0.15;
  auto beam = [&](double x, double y) {
    return constant ? 0.0 : std::exp(-(x * x + y * y) / (2.0 * width * width));
  };
  RadField J = RadField::zeros(g.num_columns(), quad.size(), 1);
  for (int m = 0; m < quad.size(); ++m)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) J.I(g.column(i, j), m) = beam(g.xc(i), g.yc(j));
  TransportConfig tc;
  tc.lateral = LateralRadiation::Absorbing;
  J = advance_radiation_2d(J, s, g, quad, opac, T, tc);
  double e2 = 0.0;
  for (int m = 0; m < quad.size(); ++m) {
    const double s1 = quad.dirs(m, 0), s2 = quad.dirs(m, 1);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const double exact = beam(g.xc(i) - s1 * T, g.yc(j) - s2 * T) * std::exp(-sa * T);
        const double d = J.I(g.column(i, j), m) - exact;
        e2 += quad.w(m) * d * d * g.column_area();
      }
  }
  return std::sqrt(e2);
}

}  // namespace

ManufacturedResult manufactured_convergence(ManufacturedSolver solver, const std::vector<int>& levels,
                                            bool constant) {
  ManufacturedResult out;
  for (int n : levels) {
    out.levels.push_back(n);
    out.h.push_back(1.0 / n);
    out.error.push_back(solver == ManufacturedSolver::Hydro2D ? hydro_mms_error(n, constant)
                                                              : transport_mms_error(n, constant));
  }
  bool all_zero = std::all_of(out.error.begin(), out.error.end(), [](double e) { return e == 0.0; });
  out.order = all_zero ? std::numeric_limits<double>::infinity()
                       : (out.levels.size() >= 2 ? fitted_order(out.h, out.error) : 0.0);
  return out;
}

KernelSuite run_kernel_suite(const std::vector<double>& eps, int n, int nz) {
  const LayerGrid g = LayerGrid::disk(n, nz, eps.front(), 1.0);
  const Eigen::ArrayXd r = Eigen::ArrayXd::Ones(g.num_columns());
  const std::vector<KernelSample> samples{{3 * n / 4, n / 2, 0.25}, {3 * n / 4 - 1, n / 2, 0.25}, {n / 2, n / 2, 0.25}};
  std::vector<Eigen::Vector2d> oracle;
  for (const auto& s : samples)
    oracle.push_back(principal_value_polar([](double, double) { return 1.0; }, ray_length_disk(1.0),
                                           Eigen::Vector2d(g.xc(s.i), g.yc(s.j)), 4000, 64));
  KernelSuite k;
  k.g3 = kernel_limit_g3(r, g, eps, samples);
  k.g4 = kernel_limit_g4(r, g, eps, samples, &oracle);
  k.g3_decreasing = k.g3.strictly_decreasing;
  k.g4_decreasing = k.g4.strictly_decreasing;
  k.g4_relative_excess = std::abs(k.g4.gap_vs_oracle.back() - k.g4.self_gap) / k.g4.self_gap;
  k.g4_within = k.g4_relative_excess <= 0.05;
  k.verdict = k.g3_decreasing && k.g4_decreasing && k.g4_within;
  return k;
}

// ---------------------------------------------------------------------------------------------
// outputs

namespace {

std::string run_tag(const ScenarioResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_eps%g", to_string(r.regime).c_str(), r.eps);
  return buf;
}

}  // namespace

nlohmann::json scenario_json(const ScenarioResult& r) {
  return {{"eps", r.eps},
          {"regime", to_string(r.regime)},
          {"dt", r.dt},
          {"steps", r.steps},
          {"steps_done", r.steps_done},
          {"completed", r.completed},
          {"failure", r.failure},
          {"runtime_s", r.runtime_s},
          {"entropy0", r.entropy0},
          {"max_entropy", r.max_entropy},
          {"final_entropy", r.final_entropy},
          {"w12_gap", r.w12_gap},
          {"envelope_holds", r.gronwall.holds},
          {"envelope_worst_ratio", r.gronwall.worst_ratio},
          {"energy3_holds", r.energy3.holds},
          {"energy2_holds", r.energy2.holds},
          {"radiation_l2_3d_holds", r.l2_3.holds},
          {"radiation_l2_2d_holds", r.l2_2.holds},
          {"dg_min_flux", r.dg_min},
          {"mass_drift3", r.mass_drift3},
          {"mass_drift2", r.mass_drift2},
          {"rho_lo", r.rho_lo},
          {"rho_hi", r.rho_hi},
          {"lb_constant", r.lb_constant},
          {"lb_sample_margin", r.lb_sample_margin},
          {"lb_snapshot_margin", r.lb_snapshot_margin},
          {"max_split_gap", r.max_split_gap},
          {"max_target_residual", r.max_target_residual},
          {"max_grad_w", r.max_grad_w},
          {"halvings", r.total_halvings},
          {"clip_mass", r.clip_mass},
          {"e0", r.norms.e0},
          {"E0", r.norms.E0}};
}

std::vector<std::string> write_scenario_outputs(const ScenarioResult& r, const ScenarioConfig& cfg,
                                                const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string base = (std::filesystem::path(dir) / ("entropy_" + run_tag(r))).string();
  const std::string ledger = (std::filesystem::path(dir) / ("ledger_" + run_tag(r) + ".csv")).string();
  write_entropy_csv(base + ".csv", r.report);
  nlohmann::json meta = {{"config", to_json(cfg)},
                         {"version", version_string()},
                         {"wall_clock_s", r.runtime_s},
                         {"run", scenario_json(r)}};
  write_entropy_json(base + ".json", r.report, meta);
  write_ledger_csv(ledger, r.ledger3);
  return {base + ".csv", base + ".json", ledger};
}

nlohmann::json summary_json(const SweepResult& s, const ScenarioConfig& cfg) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.entries) runs.push_back(scenario_json(r));
  return {{"version", version_string()},
          {"config", to_json(cfg)},
          {"runs", runs},
          {"checks",
           {{"entropy_decreasing", s.entropy_decreasing},
            {"w12_decreasing", s.w12_decreasing},
            {"all_completed", s.all_completed},
            {"verdict", s.verdict}}},
          {"final_ratio", s.final_ratio},
          {"runtime_s", s.runtime_s}};
}

}  // namespace thinlayer
