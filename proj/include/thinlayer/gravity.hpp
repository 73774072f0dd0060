#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thinlayer/grid.hpp"
#include "thinlayer/params.hpp"

namespace thinlayer {

enum class GravityKind { Phi1, Phi2, SingleLayer2D, External2D };

struct GravityField {
  Eigen::ArrayXXd grad_phi;  // one row per cell (3 columns) or per column (2 columns)
  GravityKind kind = GravityKind::Phi1;
};

// Point masses approximating g on a bounded support; mass = g(y) * quadrature weight.
struct ExternalSource {
  Eigen::ArrayX3d nodes;
  Eigen::ArrayXd mass;

  static ExternalSource none();
  static ExternalSource point(const Eigen::Vector3d& y, double m);
  // Smooth bump (1 - |y-c|^2/R^2)^2 sampled on an n^3 midpoint grid over the cube of half-width R,
  // scaled to the given total mass. Even in y3 about c3.
  static ExternalSource bump(const Eigen::Vector3d& center, double radius, double total_mass, int n);

  int size() const { return static_cast<int>(mass.size()); }
  double total_mass() const { return mass.sum(); }
};

// eps * Phi_1 by midpoint quadrature with self-cell exclusion, times G: the gradient of the
// self-gravity potential, grad_eps phi = -eps G sum rho(y) (x_h - y_h, eps(x3 - y3)) / |.|^3 vol.
GravityField grad_phi_selfgrav(const Eigen::ArrayXd& rho, const LayerGrid& grid, const ModelParams& params);

// Phi_2 = -G sum m (x_h - y_h, eps x3 - y3) / |.|^3 over the source nodes. Evaluation points
// coinciding with a node skip that node; the number of skips is returned through `skipped`.
GravityField grad_phi_external(const LayerGrid& grid, const ExternalSource& source, double eps, double G,
                               int* skipped = nullptr);

// Tangential gradient of the single-layer potential, -G v.p. sum r(y)(x - y)/|x - y|^3 dy.
GravityField grad_single_layer_2d(const Eigen::ArrayXd& r, const LayerGrid& grid, double G);

struct ExternalPotential2D {
  Eigen::ArrayXd phi;        // phi~ per column, G * sum m / sqrt(|x_h - y_h|^2 + y3^2)
  GravityField gradient;     // External2D
};

ExternalPotential2D external_potential_2d(const LayerGrid& grid, const ExternalSource& source, double G);

// Point evaluations at an arbitrary horizontal position (eps = 0 limit).
double external_potential_at(const ExternalSource& source, const Eigen::Vector2d& x, double G);
Eigen::Vector2d external_gradient_at(const ExternalSource& source, const Eigen::Vector2d& x, double G);

// max over active columns of |sum m y3 / (|x_h - y_h|^2 + y3^2)^{3/2}|, the odd moment condition.
double external_odd_moment(const ExternalSource& source, const LayerGrid& grid);

// Raw layer sums for an x3-independent density r (per column) at (x_h, x3):
//   horizontal = sum r(y_h)(x_h - y_h)/|.|^3 vol, vertical = sum r(y_h) eps(x3 - y3)/|.|^3 vol,
// |.|^2 = |x_h - y_h|^2 + eps^2 (x3 - y3)^2; sources closer than 1e-14 are skipped.
struct LayerSum {
  Eigen::Vector2d horizontal = Eigen::Vector2d::Zero();
  double vertical = 0.0;
};
LayerSum layer_kernel_sum(const Eigen::ArrayXd& r, const LayerGrid& grid, double eps, const Eigen::Vector2d& x,
                          double x3);

// Planar midpoint sum r(y)(x - y)/|x - y|^3 dy with self-cell exclusion at a column centre.
Eigen::Vector2d planar_kernel_sum(const Eigen::ArrayXd& r, const LayerGrid& grid, int i, int j);

// Refined polar principal value of int r(y)(x - y)/|x - y|^3 dy over a star-shaped domain about x:
//   -int e_t ( int_0^{R(t)} (r(x + s e_t) - r(x))/s ds + r(x) ln R(t) ) dt.
using DensityFn = std::function<double(double, double)>;
using RayLengthFn = std::function<double(const Eigen::Vector2d&, double)>;
Eigen::Vector2d principal_value_polar(const DensityFn& r, const RayLengthFn& ray, const Eigen::Vector2d& x,
                                      int n_theta, int n_radial);
RayLengthFn ray_length_disk(double radius);
RayLengthFn ray_length_box(double xlo, double xhi, double ylo, double yhi);

struct KernelSample {
  int i = 0, j = 0;  // column
  double x3 = 0.25;
};

struct KernelLimitReport {
  std::vector<double> eps;
  std::vector<double> gap;            // reported quantity per eps (sup over samples)
  std::vector<double> literal;        // G3 only: value without the leading eps
  std::vector<double> gap_vs_oracle;  // G4 only, when an oracle is supplied
  double self_gap = 0.0;              // G4 only: sup |v.p. grid sum - oracle|
  bool strictly_decreasing = false;
};

// sup over samples of |eps * vertical layer sum| for each eps.
KernelLimitReport kernel_limit_g3(const Eigen::ArrayXd& r, const LayerGrid& grid, const std::vector<double>& eps,
                                  const std::vector<KernelSample>& samples);

// sup over samples of |horizontal layer sum(eps) - planar v.p. sum|; with `oracle` (one value per
// sample) also the distance to the oracle and the oracle's self-convergence gap.
KernelLimitReport kernel_limit_g4(const Eigen::ArrayXd& r, const LayerGrid& grid, const std::vector<double>& eps,
                                  const std::vector<KernelSample>& samples,
                                  const std::vector<Eigen::Vector2d>* oracle = nullptr);

// x1,x2,x3,F1,F2,F3 rows, one per active cell (x3 and F3 are 0 for planar fields).
void write_gravity_csv(const std::string& path, const GravityField& field, const LayerGrid& grid);

}  // namespace thinlayer
