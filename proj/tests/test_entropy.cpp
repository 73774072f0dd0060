#include <doctest.h>

#include <cmath>
#include <random>

#include "thinlayer/constitutive.hpp"
#include "thinlayer/entropy.hpp"

using namespace thinlayer;

namespace {

ModelParams quiet() {
  ModelParams p;
  p.G = 0.0;
  p.chi = 0.0;
  return p;
}

struct Fixture {
  LayerGrid g;
  AngularQuadrature q = AngularQuadrature::product(2, 4);
  ModelParams p;
  HydroContext c3, c2;
  TargetSnapshot target;
  FluidState3 ext;
  RadField J3;

  Fixture(int n, const ModelParams& params, double eps = 0.2)
      : g(LayerGrid::unit_square(n, n, 4, eps)),
        p(params),
        c3(HydroContext::make3d(g, p, q)),
        c2(HydroContext::make2d(g, p, q)) {
    const LayerGrid& pl = c2.grid;
    target.state = FluidState2::zeros(pl);
    target.dr_dt = Eigen::ArrayXd::Zero(pl.num_columns());
    target.dw_dt = Eigen::ArrayX2d::Zero(pl.num_columns(), 2);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int c = pl.column(i, j);
        const double x = pl.xc(i), y = pl.yc(j);
        const double w = std::cos(M_PI * x) * std::cos(M_PI * y);
        target.state.r(c) = 1.0 + 0.3 * std::exp(-(x * x + y * y) / 0.05);
        target.state.w(c, 0) = 0.4 * w * w * std::sin(M_PI * y);
        target.state.w(c, 1) = -0.3 * w * w * std::sin(M_PI * x);
        target.dr_dt(c) = 0.2 * std::sin(M_PI * x) * w;
        target.dw_dt(c, 0) = 0.1 * w;
        target.dw_dt(c, 1) = -0.05 * w * x;
      }
    target.J = equilibrium_field(target.state.r, q, p.opacities);
    auto e = extrude_2d_to_3d(target.state, target.J, g);
    ext = e.first;
    J3 = e.second;
  }
};

FluidState3 perturbed(const Fixture& f, unsigned seed, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  FluidState3 s = f.ext;
  for (int c = 0; c < f.g.num_cells(); ++c) {
    s.rho(c) *= 1.0 + amp * U(rng);
    for (int d = 0; d < 3; ++d) s.u(c, d) += amp * U(rng);
  }
  return s;
}

}  // namespace

TEST_CASE("relative entropy closed forms") {
  const LayerGrid g = LayerGrid::unit_square(4, 4, 2, 0.3);
  const AngularQuadrature q = AngularQuadrature::product(2, 4);
  ModelParams p;
  p.a = 1.0;
  p.gamma = 2.0;
  FluidState3 s = FluidState3::zeros(g);
  s.rho.setConstant(2.0);
  const RadField I = equilibrium_field(s.rho, q, p.opacities);
  const EntropyComponents zero = relative_entropy(s, I, s, I, g, p, q);
  CHECK(zero.total == 0.0);

  // u = V + (delta, 0, 0), rho = r = 2 on the unit volume: 1/2 * 2 * delta^2
  const double delta = 0.37;
  FluidState3 u = s;
  u.u.col(0) += delta;
  const EntropyComponents k = relative_entropy(u, I, s, I, g, p, q);
  CHECK(k.kinetic == doctest::Approx(delta * delta).epsilon(1e-14));
  CHECK(k.pressure == 0.0);
  CHECK(k.radiative == 0.0);

  FluidState3 a = s, b = s;
  a.rho.setConstant(3.0);
  b.rho.setConstant(1.0);
  const EntropyComponents pr = relative_entropy(a, I, b, I, g, p, q);
  CHECK(pr.pressure == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(pr.kinetic == 0.0);

  // radiative part: 1/2 sum w (I - J)^2 with I - J = 0.1 everywhere
  RadField J = I;
  J.I += 0.1;
  const EntropyComponents rd = relative_entropy(s, I, s, J, g, p, q);
  CHECK(rd.radiative == doctest::Approx(0.5 * 0.01 * q.weight_sum()).epsilon(1e-13));

  b.rho(3) = 0.0;
  CHECK_THROWS_AS(relative_entropy(a, I, b, I, g, p, q), std::domain_error);
}

TEST_CASE("essential and residual sets") {
  const Eigen::ArrayXd r = Eigen::ArrayXd::LinSpaced(50, 0.8, 1.6);
  const LayerGrid g = LayerGrid::unit_square(50, 1, 1, 1.0);
  const auto same = essential_residual_split(r, r, g);
  CHECK(same.count_essential() == 50);
  const auto vac = essential_residual_split(Eigen::ArrayXd::Zero(50), r, g);
  CHECK(vac.count_essential() == 0);
  CHECK(vac.lower == doctest::Approx(0.4));
  CHECK(vac.upper == doctest::Approx(3.2));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 5.0);
  Eigen::ArrayXd rho(50), h(50);
  for (int i = 0; i < 50; ++i) rho(i) = U(rng), h(i) = U(rng) - 2.5;
  const auto m = essential_residual_split(rho, r, g);
  CHECK((m.ess(h) + m.res(h) - h).abs().maxCoeff() == 0.0);
  CHECK(m.count_essential() > 0);
  CHECK(m.count_essential() < 50);
}

TEST_CASE("entropy lower bound") {
  ModelParams p;
  p.a = 1.0;
  p.gamma = 2.0;
  // E(0, 1) = 1 and the residual weight is 1, so any admissible C is at most 1
  CHECK(relative_distance(0.0, 1.0, p) == doctest::Approx(1.0));
  CHECK(lower_bound_weight(0.0, 1.0, 1.0, 1.0, p) == doctest::Approx(1.0));
  const double C = fit_lower_bound_constant(p, 0.8, 1.6);
  CHECK(C > 0.0);
  CHECK(C <= 0.5);
  const LowerBoundSample smp = sample_lower_bound(p, 0.8, 1.6, C);
  CHECK(smp.samples == 10000);
  CHECK(smp.holds);
  CHECK(smp.worst_margin >= 0.0);

  for (FroudeRegime reg : {FroudeRegime::One, FroudeRegime::SqrtEps}) {
    const ModelParams q = ModelParams::for_regime(reg);
    const double Cq = fit_lower_bound_constant(q, 0.5, 2.0);
    CHECK(sample_lower_bound(q, 0.5, 2.0, Cq).holds);
  }

  Fixture f(8, quiet());
  const double lo = f.target.state.r.minCoeff(), hi = f.target.state.r.maxCoeff();
  const double Cf = fit_lower_bound_constant(f.p, lo, hi);
  const LowerBoundCheck same = entropy_lower_bound_check(f.ext, f.J3, f.ext, f.J3, f.g, f.p, f.q, lo, hi, Cf);
  CHECK(same.entropy == 0.0);
  CHECK(same.bound == 0.0);
  CHECK(same.holds);
  for (unsigned seed = 1; seed <= 10; ++seed) {
    const FluidState3 s = perturbed(f, seed, 0.5);
    const LowerBoundCheck c = entropy_lower_bound_check(s, f.J3, f.ext, f.J3, f.g, f.p, f.q, lo, hi, Cf);
    CHECK(c.holds);
    CHECK(c.margin >= 0.0);
  }
}

TEST_CASE("remainders at coincidence") {
  ModelParams p;  // rotation, gravity and radiation all on
  for (int n : {16, 32}) {
    Fixture f(n, p);
    const Remainders R = remainder_decomposition(f.c3, f.c2, f.ext, f.J3, f.target);
    for (int i : {0, 1, 4, 5, 6, 7}) CHECK(std::abs(R.R[i]) <= 1e-14);
    CHECK(std::abs(R.R[2]) <= 1e-14);  // every term carries V - u
    // the pressure block reduces to -int div(p(r) V); the discrete operators keep it at roundoff
    CHECK(std::abs(R.R[3]) <= 1e-14);
  }
}

TEST_CASE("remainders: static target") {
  Fixture f(8, quiet());
  f.target.state.r.setConstant(1.2);
  f.target.state.w.setZero();
  f.target.dr_dt.setZero();
  f.target.dw_dt.setZero();
  f.target.J = equilibrium_field(f.target.state.r, f.q, f.p.opacities);
  const FluidState3 s = perturbed(f, 5, 0.3);
  const Remainders R = remainder_decomposition(f.c3, f.c2, s, f.J3, f.target);
  CHECK(R.R[0] == 0.0);
  CHECK(R.R[1] == 0.0);
}

TEST_CASE("regrouping identity") {
  ModelParams p;
  Fixture f(12, p);
  for (unsigned seed : {3u, 4u, 5u}) {
    const FluidState3 s = perturbed(f, seed, 0.2);
    RadField I = f.J3;
    I.I *= 1.1;
    const Remainders R = remainder_decomposition(f.c3, f.c2, s, I, f.target);
    // sum R - sum direct = -int div S(V).(V - u) - int S(grad V):(grad V - grad u)
    const FluidState3 V = f.ext;
    const Eigen::ArrayX3d divS = viscous_divergence(f.c2, to_state3(f.target.state).u);
    const Eigen::ArrayXXd gV = cell_gradients(f.c2, to_state3(f.target.state).u);
    const Eigen::ArrayXXd gU = cell_gradients(f.c3, s.u);
    double visc = 0.0, scale = 0.0;
    const int nc = f.g.num_columns();
    for (int c = 0; c < f.g.num_cells(); ++c) {
      const Eigen::Vector3d vmu = (V.u.row(c) - s.u.row(c)).transpose().matrix();
      const Eigen::Matrix3d GV = gradient_at(gV, c % nc);
      visc += f.g.cell_volume() * (-divS.row(c % nc).transpose().matrix().dot(vmu) -
                                   contract(stress3(GV, p), (GV - gradient_at(gU, c)).eval()));
    }
    for (double x : R.R) scale += std::abs(x);
    CHECK(std::abs(R.sum - R.direct_sum - visc) <= 1e-12 * scale);
  }
}

TEST_CASE("pressure block against direct quadrature") {
  ModelParams p;
  std::vector<double> err;
  for (int n : {16, 32}) {
    Fixture f(n, p);
    const FluidState3 s = perturbed(f, 8, 0.2);
    const Remainders R = remainder_decomposition(f.c3, f.c2, s, f.J3, f.target);
    // analytic grad r and div w of the fixture fields at cell centres
    double oracle = 0.0;
    for (int k = 0; k < f.g.nz; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const int c = f.g.index(i, j, k), col = f.g.column(i, j);
          const double x = f.g.xc(i), y = f.g.yc(j);
          const double r = f.target.state.r(col);
          const double e = std::exp(-(x * x + y * y) / 0.05);
          const Eigen::Vector3d gr(0.3 * e * (-2 * x / 0.05), 0.3 * e * (-2 * y / 0.05), 0.0);
          const Eigen::Vector3d gp = pressure_derivative(r, p) * gr;
          const double w = std::cos(M_PI * x) * std::cos(M_PI * y);
          const double wx = -M_PI * std::sin(M_PI * x) * std::cos(M_PI * y);
          const double wy = -M_PI * std::cos(M_PI * x) * std::sin(M_PI * y);
          const double div = 0.4 * 2 * w * wx * std::sin(M_PI * y) - 0.3 * 2 * w * wy * std::sin(M_PI * x);
          const Eigen::Vector3d u = s.u.row(c).transpose().matrix();
          const Eigen::Vector3d V = f.ext.u.row(c).transpose().matrix();
          const double rho = s.rho(c);
          oracle += f.g.cell_volume() * ((1 - rho / r) * pressure_derivative(r, p) * f.target.dr_dt(col) -
                                         rho / r * u.dot(gp) - pressure(rho, p) * div - gp.dot(V - u));
        }
    err.push_back(std::abs(R.R[3] - oracle) / std::abs(oracle));
  }
  CHECK(err[1] < err[0]);
  CHECK(err[1] < 0.05);
}

TEST_CASE("gronwall envelope") {
  const std::vector<double> t{0.0, 0.1, 0.2, 0.3};
  const std::vector<double> zero(4, 0.0), K{1.0, 2.0, 0.5, 3.0};
  const GronwallResult a = gronwall_envelope(t, zero, K, zero);
  for (double e : a.envelope) CHECK(e == 0.0);
  CHECK(a.holds);
  const GronwallResult b = gronwall_envelope(t, {0.0, 1e-3, 0.0, 0.0}, K, zero);
  CHECK_FALSE(b.holds);
  CHECK(b.first_violation == 1);

  const std::vector<double> h{0.5, 0.6, 0.7, 0.9};
  const GronwallResult c = gronwall_envelope(t, {0.5, 0.55, 0.6, 0.8}, zero, h);
  for (size_t i = 0; i < t.size(); ++i) CHECK(c.envelope[i] == doctest::Approx(h[i]).epsilon(1e-15));
  CHECK(c.holds);

  // constant h and K: envelope = h exp(K t) up to trapezoid error
  const int N = 2001;
  std::vector<double> tt(N), hh(N, 1.0), KK(N, 2.0), EE(N, 0.0);
  for (int i = 0; i < N; ++i) tt[i] = i * 1e-3;
  const GronwallResult d = gronwall_envelope(tt, EE, KK, hh);
  CHECK(d.envelope.back() == doctest::Approx(std::exp(2.0 * 2.0)).epsilon(1e-5));
}

TEST_CASE("gradient gap") {
  Fixture f(8, quiet());
  CHECK(gradient_gap(f.c3, f.ext.u, f.ext.u) == 0.0);
  FluidState3 s = f.ext;
  s.u.col(0) += 0.5;  // constant shift: the ghost reflection makes it visible only at the walls
  CHECK(gradient_gap(f.c3, s.u, f.ext.u) > 0.0);
}
