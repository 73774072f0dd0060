#pragma once

#include <limits>
#include <string>
#include <vector>

namespace thinlayer {

enum class FroudeRegime { SqrtEps, One };
enum class CentrifugalForm { UnitRadial, GradientOfSquare };

struct FrequencyBand {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double node = 0.0;    // representative frequency
  double weight = 1.0;  // quadrature weight of the band
};

// sigma(rho) = s0 rho / (1 + rho), B(nu, rho) = b0 rho / (1 + rho) exp(-nu)
struct Opacities {
  double sigma_a0 = 1.0;
  double sigma_s0 = 0.5;
  double planck_b0 = 1.0;
  std::vector<FrequencyBand> bands{FrequencyBand{}};

  double c1() const;  // sup of the opacities
  double c2() const;  // bound on B and the density derivatives
  double h(double nu) const;  // integrable majorant of sigma_a B (1 + B)
  int num_bands() const { return static_cast<int>(bands.size()); }
  void validate() const;
};

struct ModelParams {
  double mu = 0.02;
  double xi = 0.0;
  double a = 1.0;
  double gamma = 2.0;
  double chi = 0.5;
  double G = 0.1;
  FroudeRegime regime = FroudeRegime::One;
  int eta = 0;
  CentrifugalForm centrifugal_form = CentrifugalForm::GradientOfSquare;
  Opacities opacities;

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;

  static ModelParams for_regime(FroudeRegime r);
};

std::string to_string(FroudeRegime r);
FroudeRegime regime_from_string(const std::string& s);
std::string to_string(CentrifugalForm f);
CentrifugalForm centrifugal_from_string(const std::string& s);

}  // namespace thinlayer
