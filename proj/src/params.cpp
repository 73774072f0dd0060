#include "thinlayer/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "thinlayer/constitutive.hpp"

namespace thinlayer {

double Opacities::c1() const { return std::max(sigma_a0, sigma_s0); }

double Opacities::c2() const { return std::max({sigma_a0, sigma_s0, planck_b0}); }

double Opacities::h(double nu) const {
  return sigma_a0 * planck_b0 * (1.0 + planck_b0) * std::exp(-nu);
}

void Opacities::validate() const {
  if (sigma_a0 < 0 || sigma_s0 < 0 || planck_b0 < 0)
    throw std::invalid_argument("opacities: coefficients must be nonnegative");
  if (bands.empty()) throw std::invalid_argument("opacities: at least one frequency band required");
  for (const auto& b : bands) {
    if (!(b.weight > 0) || b.node < 0 || b.hi <= b.lo)
      throw std::invalid_argument("opacities: malformed frequency band");
  }
}

void ModelParams::validate() const {
  if (!(mu > 0)) throw std::invalid_argument("params: mu must be positive");
  if (xi < 0) throw std::invalid_argument("params: xi must be nonnegative");
  if (!(a > 0)) throw std::invalid_argument("params: a must be positive");
  if (!(gamma > 1.5)) throw std::invalid_argument("params: gamma must exceed 3/2");
  if (G < 0) throw std::invalid_argument("params: G must be nonnegative");
  if (regime == FroudeRegime::SqrtEps) {
    if (eta != 1) throw std::invalid_argument("params: Fr=sqrt(eps) requires eta=1");
    if (gamma < 12.0 / 5.0) throw std::invalid_argument("params: Fr=sqrt(eps) requires gamma >= 12/5");
  } else if (eta != 0) {
    throw std::invalid_argument("params: Fr=1 requires eta=0");
  }
  opacities.validate();
}

ModelParams ModelParams::for_regime(FroudeRegime r) {
  ModelParams p;
  p.regime = r;
  if (r == FroudeRegime::SqrtEps) {
    p.eta = 1;
    p.gamma = 2.5;
  } else {
    p.eta = 0;
    p.gamma = 2.0;
  }
  return p;
}

std::string to_string(FroudeRegime r) { return r == FroudeRegime::SqrtEps ? "freps" : "fr1"; }

FroudeRegime regime_from_string(const std::string& s) {
  if (s == "freps" || s == "SqrtEps") return FroudeRegime::SqrtEps;
  if (s == "fr1" || s == "One") return FroudeRegime::One;
  throw std::invalid_argument("unknown regime: " + s);
}

std::string to_string(CentrifugalForm f) {
  return f == CentrifugalForm::UnitRadial ? "UnitRadial" : "GradientOfSquare";
}

CentrifugalForm centrifugal_from_string(const std::string& s) {
  if (s == "UnitRadial") return CentrifugalForm::UnitRadial;
  if (s == "GradientOfSquare") return CentrifugalForm::GradientOfSquare;
  throw std::invalid_argument("unknown centrifugal form: " + s);
}

OpacityBoundReport check_opacity_bounds(const Opacities& o, int n_rho, int n_nu, double rho_max,
                                        double nu_max) {
  OpacityBoundReport rep;
  const double c1 = o.c1(), c2 = o.c2();
  for (int i = 0; i < n_rho; ++i) {
    const double rho = rho_max * i / std::max(1, n_rho - 1);
    const double sa = sigma_a(rho, o), ss = sigma_s(rho, o);
    if (c1 > 0) rep.worst_sigma = std::max(rep.worst_sigma, std::max(sa, ss) / c1);
    if (sa < 0 || ss < 0) rep.ok = false;
    for (int j = 0; j < n_nu; ++j) {
      const double nu = nu_max * j / std::max(1, n_nu - 1);
      const double b = planck_b(nu, rho, o);
      const double hv = o.h(nu);
      if (hv > 0) rep.worst_majorant = std::max(rep.worst_majorant, sa * b * (1 + b) / hv);
      else if (sa * b * (1 + b) > 0) rep.ok = false;
      if (c2 > 0) {
        const double d = std::max({dsigma_a(rho, o), dsigma_s(rho, o), dplanck_b(nu, rho, o), b});
        rep.worst_derivative = std::max(rep.worst_derivative, d / c2);
      }
      ++rep.samples;
    }
  }
  rep.ok = rep.ok && rep.worst_sigma <= 1.0 && rep.worst_majorant <= 1.0 && rep.worst_derivative <= 1.0;
  return rep;
}

}  // namespace thinlayer
