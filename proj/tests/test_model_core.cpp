#include <doctest.h>

#include <cmath>
#include <random>

#include "thinlayer/constitutive.hpp"
#include "thinlayer/grid.hpp"
#include "thinlayer/params.hpp"
#include "thinlayer/quadrature.hpp"

using namespace thinlayer;

namespace {

ModelParams law(double a, double gamma) {
  ModelParams p;
  p.a = a;
  p.gamma = gamma;
  return p;
}

}  // namespace

TEST_CASE("pressure law") {
  CHECK(pressure(0.0, law(1.3, 2.2)) == 0.0);
  CHECK(pressure(2.0, law(1, 2)) == doctest::Approx(4.0).epsilon(1e-15));
  // 2 * 3^(5/3), 30-digit evaluation
  CHECK(pressure(3.0, law(2, 5.0 / 3.0)) == doctest::Approx(12.4805029383114246871803409461).epsilon(1e-14));
  CHECK_THROWS_AS(pressure(-1.0, law(1, 2)), std::domain_error);
  // p' by central differences
  const ModelParams p = law(1.7, 2.5);
  for (double r : {0.3, 1.0, 4.0}) {
    const double h = 1e-6 * r;
    const double fd = (pressure(r + h, p) - pressure(r - h, p)) / (2 * h);
    CHECK(pressure_derivative(r, p) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("pressure potential") {
  CHECK(pressure_potential(0.0, law(1, 2)) == 0.0);
  CHECK(pressure_potential(3.0, law(1, 2)) == doctest::Approx(9.0).epsilon(1e-15));
  const ModelParams p = law(1, 2);
  CHECK(pressure_potential(2.0, p) <= 0.5 * (pressure_potential(1.0, p) + pressure_potential(3.0, p)));
  CHECK(pressure_potential(2.0, p) == doctest::Approx(4.0));
  // rho H'(rho) - H(rho) = p(rho)
  const ModelParams q = law(0.8, 2.5);
  for (double r : {0.2, 1.0, 5.0}) {
    const double h = 1e-6 * r;
    const double dH = (pressure_potential(r + h, q) - pressure_potential(r - h, q)) / (2 * h);
    CHECK(r * dH - pressure_potential(r, q) == doctest::Approx(pressure(r, q)).epsilon(1e-7));
    CHECK(dH == doctest::Approx(enthalpy(r, q)).epsilon(1e-7));
  }
}

TEST_CASE("relative distance") {
  const ModelParams p = law(1, 2);
  CHECK(relative_distance(1.7, 1.7, p) == 0.0);
  CHECK(relative_distance(3.0, 1.0, p) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(relative_distance(0.0, 1.0, p) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(relative_distance(1.0, 0.0, p), std::domain_error);
  // nonnegative and convex in rho for random samples
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 10.0), R(0.1, 5.0), G(1.1, 3.0);
  for (int n = 0; n < 2000; ++n) {
    const ModelParams q = law(1.0, G(rng));
    const double a = U(rng), b = U(rng), r = R(rng);
    CHECK(relative_distance(a, r, q) >= 0.0);
    const double mid = relative_distance(0.5 * (a + b), r, q);
    CHECK(mid <= 0.5 * (relative_distance(a, r, q) + relative_distance(b, r, q)) + 1e-9 * (1 + a * a + b * b));
  }
}

TEST_CASE("stress tensors") {
  ModelParams p;
  p.mu = 1.0;
  p.xi = 0.0;
  CHECK(stress3(Eigen::Matrix3d::Zero().eval(), p).norm() == 0.0);
  CHECK(stress3(Eigen::Matrix3d::Identity().eval(), p).norm() < 1e-15);
  p.xi = 0.7;
  CHECK((stress3(Eigen::Matrix3d::Identity().eval(), p) - 2.1 * Eigen::Matrix3d::Identity()).norm() < 1e-14);

  p.xi = 0.0;
  CHECK(stress2_h(Eigen::Matrix2d::Zero().eval(), p).norm() == 0.0);
  CHECK((stress2_h(Eigen::Matrix2d::Identity().eval(), p) - (2.0 / 3.0) * Eigen::Matrix2d::Identity()).norm() < 1e-15);

  // S:G = (xi - 2/3 mu)(div)^2 + mu(|G|^2 + G:G^T)
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N;
  p.mu = 0.37;
  p.xi = 0.21;
  for (int n = 0; n < 200; ++n) {
    Eigen::Matrix3d G;
    for (int i = 0; i < 9; ++i) G(i) = N(rng);
    const double div = G.trace();
    const double lhs = contract(stress3(G, p), G);
    const double rhs = (p.xi - 2.0 / 3.0 * p.mu) * div * div + p.mu * (G.squaredNorm() + contract(G, G.transpose().eval()));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(lhs >= -1e-12);
  }
  // the planar stress is the 3D stress of a gradient with zero third row and column
  for (int n = 0; n < 50; ++n) {
    Eigen::Matrix2d g;
    for (int i = 0; i < 4; ++i) g(i) = N(rng);
    Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
    G.topLeftCorner<2, 2>() = g;
    const Eigen::Matrix3d S = stress3(G, p);
    const Eigen::Matrix2d Sh = stress2_h(g, p);
    CHECK(contract(S, G) == doctest::Approx(contract(Sh, g)).epsilon(1e-12));
  }
}

TEST_CASE("opacities and emission") {
  Opacities o;
  CHECK(sigma_a(0.0, o) == 0.0);
  CHECK(sigma_s(0.0, o) == 0.0);
  CHECK(planck_b(0.3, 0.0, o) == 0.0);
  o.sigma_a0 = 1.0;
  CHECK(sigma_a(1e12, o) == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(sigma_a(1e12, o) <= o.c1());
  const double h = 1e-7;
  CHECK((sigma_a(h, o) - sigma_a(0.0, o)) / h == doctest::Approx(o.sigma_a0).epsilon(1e-6));
  CHECK(dsigma_a(0.0, o) == o.sigma_a0);
  CHECK(dsigma_a(0.0, o) <= o.c2());
  for (double r : {0.1, 1.0, 7.0}) {
    const double fd = (planck_b(0.5, r + 1e-6, o) - planck_b(0.5, r - 1e-6, o)) / 2e-6;
    CHECK(dplanck_b(0.5, r, o) == doctest::Approx(fd).epsilon(1e-7));
  }
  const OpacityBoundReport rep = check_opacity_bounds(o, 60, 40);
  CHECK(rep.ok);
  CHECK(rep.worst_sigma <= 1.0);
}

TEST_CASE("parameter validation") {
  ModelParams p;
  CHECK_NOTHROW(p.validate());
  p.mu = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = ModelParams::for_regime(FroudeRegime::SqrtEps);
  CHECK(p.eta == 1);
  CHECK(p.gamma >= 12.0 / 5.0);
  CHECK(regime_from_string("fr1") == FroudeRegime::One);
  CHECK(regime_from_string("freps") == FroudeRegime::SqrtEps);
  CHECK_THROWS(regime_from_string("fr2"));
}

TEST_CASE("grid and integration") {
  const LayerGrid g = LayerGrid::unit_square(8, 6, 4, 0.2);
  CHECK(g.num_cells() == 192);
  CHECK(g.index(3, 2, 1) == (1 * 6 + 2) * 8 + 3);
  CHECK(integrate3(g, Eigen::ArrayXd::Ones(g.num_cells())) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(integrate2(g.planar(), Eigen::ArrayXd::Ones(g.num_columns())) == doctest::Approx(1.0).epsilon(1e-14));
  Eigen::ArrayXd f = Eigen::ArrayXd::LinSpaced(g.num_columns(), 0.0, 1.0);
  CHECK((column_average(g, extrude(g, f)) - f).abs().maxCoeff() == 0.0);
  const LayerGrid d = LayerGrid::disk(16, 2, 0.1);
  CHECK(d.active_columns() < d.num_columns());
  CHECK_THROWS(LayerGrid::unit_square(0, 4, 4, 0.1));
}

TEST_CASE("gauss legendre") {
  for (int n : {1, 2, 5, 8}) {
    const GaussRule g = gauss_legendre(n);
    CHECK(g.weights.sum() == doctest::Approx(2.0).epsilon(1e-14));
    // exact for degree 2n - 1
    const int deg = 2 * n - 1;
    const double exact = deg % 2 == 0 ? 2.0 / (deg + 1) : 0.0;
    CHECK((g.weights * g.nodes.pow(deg)).sum() == doctest::Approx(exact).epsilon(1e-13));
    for (int i = 0; i < n; ++i) CHECK(g.nodes(i) == -g.nodes(n - 1 - i));
  }
}
