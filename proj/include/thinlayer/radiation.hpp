#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "thinlayer/grid.hpp"
#include "thinlayer/params.hpp"

namespace thinlayer {

// Product rule: Gauss-Legendre in the polar cosine times a uniform azimuth grid.
struct AngularQuadrature {
  Eigen::ArrayX3d dirs;
  Eigen::ArrayXd w;
  std::vector<int> mirror_x;  // (s1,s2,s3) -> (-s1,s2,s3)
  std::vector<int> mirror_y;  // (s1,s2,s3) -> (s1,-s2,s3)
  std::vector<int> mirror_z;  // (s1,s2,s3) -> (s1,s2,-s3)
  std::vector<int> mirror_h;  // (s1,s2,s3) -> (-s1,-s2,s3)

  // n_polar even, n_azimuth a multiple of 4.
  static AngularQuadrature product(int n_polar, int n_azimuth);

  int size() const { return static_cast<int>(w.size()); }
  double weight_sum() const { return w.sum(); }
  void validate() const;
};

enum class LateralRadiation { Absorbing, Specular };

// Intensity per cell (rows) and per (band, direction) column b*ndirs + m.
struct RadField {
  Eigen::ArrayXXd I;
  int ndirs = 0;
  int nbands = 1;

  static RadField zeros(int ncells, int ndirs, int nbands);
  int col(int m, int b) const { return b * ndirs + m; }
  int ncells() const { return static_cast<int>(I.rows()); }
};

class CflViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Eigen::Vector3d specular_reflect(const Eigen::Vector3d& dir, const Eigen::Vector3d& normal);

// S_m = sigma_a (B - I_m) + sigma_s (mean I - I_m) for one cell and one band.
Eigen::ArrayXd radiative_source(const Eigen::ArrayXd& I_cell, double rho, double nu, const Opacities& opac,
                                const AngularQuadrature& quad);

// (sigma_a + sigma_s) sum_b w_b sum_m w_m s_m I per cell; 3 columns, or 2 when planar.
Eigen::ArrayXXd radiative_momentum(const RadField& rad, const Eigen::ArrayXd& rho, const AngularQuadrature& quad,
                                   const Opacities& opac, bool planar = false);

// Isotropic equilibrium B(nu_b, rho) in every direction.
RadField equilibrium_field(const Eigen::ArrayXd& rho, const AngularQuadrature& quad, const Opacities& opac);

struct TransportConfig {
  LateralRadiation lateral = LateralRadiation::Absorbing;
  double cfl = 0.9;
  bool sources = true;
};

// Per-step bookkeeping, all already multiplied by dt and integrated over the domain.
struct TransportDiagnostics {
  double source_integral = 0.0;  // int sum_b w_b sum_m w_m (I' - I*) over the source stage
  double outflow = 0.0;          // radiative energy leaving through absorbing faces
  double l2_dissipation = 0.0;   // dt int [1/2 sigma_a sum w (B - I')^2 + sigma_s sum w (I' - mean I')^2]
  double b2_source = 0.0;        // dt int 1/2 sigma_a B^2 sum w
  int substeps = 0;
};

// Largest dt for which the upwind update is a convex combination.
double radiation_stable_dt(const LayerGrid& grid, const AngularQuadrature& quad, bool planar);

// One explicit upwind sweep followed by the implicit local source stage. Throws CflViolation
// when dt exceeds cfl * radiation_stable_dt.
RadField transport_step_3d(const RadField& rad, const FluidState3& state, const LayerGrid& grid,
                           const AngularQuadrature& quad, const Opacities& opac, double dt,
                           const TransportConfig& cfg = {}, TransportDiagnostics* diag = nullptr);

// Horizontal transport on omega (planar grid), absorbing on the boundary of omega.
RadField transport_step_2d(const RadField& J, const FluidState2& state, const LayerGrid& grid,
                           const AngularQuadrature& quad, const Opacities& opac, double dt,
                           const TransportConfig& cfg = {}, TransportDiagnostics* diag = nullptr);

// Substeps of equal length so that each satisfies the CFL bound; diagnostics are accumulated.
RadField advance_radiation_3d(const RadField& rad, const FluidState3& state, const LayerGrid& grid,
                              const AngularQuadrature& quad, const Opacities& opac, double dt,
                              const TransportConfig& cfg = {}, TransportDiagnostics* diag = nullptr);
RadField advance_radiation_2d(const RadField& J, const FluidState2& state, const LayerGrid& grid,
                              const AngularQuadrature& quad, const Opacities& opac, double dt,
                              const TransportConfig& cfg = {}, TransportDiagnostics* diag = nullptr);

struct BoundaryFluxReport {
  std::vector<double> flux;  // net outward flux per boundary face (per unit area)
  double min = 0.0;
  int faces = 0;
};

// int sum I s.n over directions and bands at every boundary face, with the inflow traces given by
// the boundary conditions (zero at absorbing faces, mirrored at specular faces).
BoundaryFluxReport boundary_flux_check(const RadField& rad, const LayerGrid& grid, const AngularQuadrature& quad,
                                       const Opacities& opac, LateralRadiation lateral = LateralRadiation::Absorbing,
                                       bool planar = false);

// E_R = int sum_b w_b sum_m w_m I.
double radiative_energy(const RadField& rad, const LayerGrid& grid, const AngularQuadrature& quad,
                        const Opacities& opac, bool planar = false);
// 1/2 int sum_b w_b sum_m w_m I^2.
double radiation_half_l2(const RadField& rad, const LayerGrid& grid, const AngularQuadrature& quad,
                         const Opacities& opac, bool planar = false);

struct RadiationL2Entry {
  double t = 0.0;
  double half_l2 = 0.0;      // at time t
  double dissipation = 0.0;  // accumulated over the step ending at t
  double b2_source = 0.0;    // accumulated over the step ending at t
};

struct RadiationL2Report {
  std::vector<double> lhs;  // half_l2 + cumulative dissipation
  std::vector<double> rhs;  // initial half_l2 + cumulative B^2 source
  double worst_margin = 0.0;  // min (rhs - lhs)
  int first_violation = -1;
  bool holds = true;
};

// Checks the discrete L^2 bound at every entry with relative tolerance rel_tol.
RadiationL2Report radiation_l2_energy(const std::vector<RadiationL2Entry>& series, double rel_tol = 1e-12);

}  // namespace thinlayer
