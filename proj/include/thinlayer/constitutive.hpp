#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "thinlayer/params.hpp"

namespace thinlayer {

template <typename Scalar>
Scalar pressure(Scalar rho, const ModelParams& p) {
  using std::pow;
  if (rho < Scalar(0)) throw std::domain_error("pressure: negative density");
  return Scalar(p.a) * pow(rho, Scalar(p.gamma));
}

template <typename Scalar>
Scalar pressure_derivative(Scalar rho, const ModelParams& p) {
  using std::pow;
  if (rho < Scalar(0)) throw std::domain_error("pressure_derivative: negative density");
  return Scalar(p.a * p.gamma) * pow(rho, Scalar(p.gamma - 1.0));
}

// H(rho) = rho * int_0^rho p(s)/s^2 ds
template <typename Scalar>
Scalar pressure_potential(Scalar rho, const ModelParams& p) {
  return pressure(rho, p) / Scalar(p.gamma - 1.0);
}

// H'(rho)
template <typename Scalar>
Scalar enthalpy(Scalar rho, const ModelParams& p) {
  using std::pow;
  if (rho < Scalar(0)) throw std::domain_error("enthalpy: negative density");
  return Scalar(p.a * p.gamma / (p.gamma - 1.0)) * pow(rho, Scalar(p.gamma - 1.0));
}

// E(rho, r) = H(rho) - H'(r)(rho - r) - H(r)
template <typename Scalar>
Scalar relative_distance(Scalar rho, Scalar r, const ModelParams& p) {
  if (!(r > Scalar(0))) throw std::domain_error("relative_distance: reference density must be positive");
  const Scalar e = pressure_potential(rho, p) - enthalpy(r, p) * (rho - r) - pressure_potential(r, p);
  return e > Scalar(0) ? e : Scalar(0);
}

// Newtonian stress of the scaled gradient, G(i,j) = d_j u_i.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> stress3(const Eigen::MatrixBase<Derived>& grad,
                                                      const ModelParams& p) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, 3, 3>;
  const Scalar div = grad.trace();
  return Scalar(p.mu) * (grad + grad.transpose() - Scalar(2.0 / 3.0) * div * Mat::Identity()) +
         Scalar(p.xi) * div * Mat::Identity();
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 2, 2> stress2_h(const Eigen::MatrixBase<Derived>& grad,
                                                        const ModelParams& p) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, 2, 2>;
  const Scalar div = grad.trace();
  return Scalar(p.mu) * (grad + grad.transpose() - div * Mat::Identity()) +
         Scalar(p.xi + p.mu / 3.0) * div * Mat::Identity();
}

// Double contraction A:B.
template <typename A, typename B>
typename A::Scalar contract(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  return x.cwiseProduct(y).sum();
}

template <typename Scalar>
Scalar sigma_a(Scalar rho, const Opacities& o) {
  return Scalar(o.sigma_a0) * rho / (Scalar(1) + rho);
}

template <typename Scalar>
Scalar sigma_s(Scalar rho, const Opacities& o) {
  return Scalar(o.sigma_s0) * rho / (Scalar(1) + rho);
}

template <typename Scalar>
Scalar planck_b(Scalar nu, Scalar rho, const Opacities& o) {
  using std::exp;
  return Scalar(o.planck_b0) * rho / (Scalar(1) + rho) * exp(-nu);
}

template <typename Scalar>
Scalar dsigma_a(Scalar rho, const Opacities& o) {
  return Scalar(o.sigma_a0) / ((Scalar(1) + rho) * (Scalar(1) + rho));
}

template <typename Scalar>
Scalar dsigma_s(Scalar rho, const Opacities& o) {
  return Scalar(o.sigma_s0) / ((Scalar(1) + rho) * (Scalar(1) + rho));
}

template <typename Scalar>
Scalar dplanck_b(Scalar nu, Scalar rho, const Opacities& o) {
  using std::exp;
  return Scalar(o.planck_b0) / ((Scalar(1) + rho) * (Scalar(1) + rho)) * exp(-nu);
}

struct OpacityBoundReport {
  bool ok = true;
  int samples = 0;
  double worst_sigma = 0.0;      // max sigma / c1
  double worst_majorant = 0.0;   // max sigma_a B (1+B) / h(nu)
  double worst_derivative = 0.0; // max derivative or B / c2
};

// Samples the cut-off hypotheses on an n_rho x n_nu grid.
OpacityBoundReport check_opacity_bounds(const Opacities& o, int n_rho, int n_nu, double rho_max = 100.0,
                                        double nu_max = 20.0);

}  // namespace thinlayer
