#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thinlayer/grid.hpp"
#include "thinlayer/hydro.hpp"
#include "thinlayer/params.hpp"
#include "thinlayer/radiation.hpp"

namespace thinlayer {

// Target solution on omega at one instant, with its time derivatives when known.
struct TargetSnapshot {
  double t = 0.0;
  FluidState2 state;
  RadField J;
  Eigen::ArrayXd dr_dt;   // per column, empty if unknown
  Eigen::ArrayX2d dw_dt;  // per column, empty if unknown

  bool has_time_derivatives() const { return dr_dt.size() > 0 && dw_dt.rows() > 0; }
};

struct EntropyComponents {
  double kinetic = 0.0;   // 1/2 int rho |u - V|^2
  double pressure = 0.0;  // int E(rho, r)
  double radiative = 0.0; // 1/2 int sum w (I - J)^2
  double total = 0.0;
};

// Target (r, V, J) given on the 3D grid (usually extruded). Throws std::domain_error if r <= 0 in an active cell.
EntropyComponents relative_entropy(const FluidState3& s, const RadField& I, const FluidState3& target,
                                   const RadField& J, const LayerGrid& grid, const ModelParams& params,
                                   const AngularQuadrature& quad);

// Cells with rho in [lo/2, 2 hi] are essential, all others residual.
struct EssentialResidualMask {
  std::vector<char> essential;  // per cell
  double lower = 0.0;           // lo/2
  double upper = 0.0;           // 2 hi

  Eigen::ArrayXd ess(const Eigen::ArrayXd& h) const;
  Eigen::ArrayXd res(const Eigen::ArrayXd& h) const;
  int count_essential() const;
  bool is_essential(int c) const { return essential[c] != 0; }
};

EssentialResidualMask essential_residual_split(const Eigen::ArrayXd& rho, double rho_lo, double rho_hi);
// Thresholds from inf and sup of the target density over active columns.
EssentialResidualMask essential_residual_split(const Eigen::ArrayXd& rho, const Eigen::ArrayXd& r,
                                               const LayerGrid& grid);

// Pointwise weight of the lower bound: 1 + rho^gamma on the residual set, (rho - r)^2 on the essential one.
double lower_bound_weight(double rho, double r, double rho_lo, double rho_hi, const ModelParams& p);

// C = min(safety * min E(rho,r)/weight, 1/2) over rho in [0, rho_max] and r in [rho_lo, rho_hi] on an
// n x n grid, refined near the thresholds.
double fit_lower_bound_constant(const ModelParams& p, double rho_lo, double rho_hi, int n = 400,
                                double rho_max = 100.0, double safety = 0.9);

struct LowerBoundSample {
  double worst_margin = 0.0;  // min of E - C weight
  double worst_rho = 0.0, worst_r = 0.0;
  int samples = 0;
  bool holds = true;
};
// Evaluates E - C weight on a fresh n x n grid (10^4 points for n = 100).
LowerBoundSample sample_lower_bound(const ModelParams& p, double rho_lo, double rho_hi, double C, int n = 100,
                                    double rho_max = 100.0);

struct LowerBoundCheck {
  double entropy = 0.0;
  double bound = 0.0;   // int (1_res + [rho^gamma]_res + [rho - r]^2_ess + rho|u - V|^2 + sum w (I - J)^2)
  double margin = 0.0;  // entropy - C bound
  double C = 0.0;
  bool holds = true;
};
LowerBoundCheck entropy_lower_bound_check(const FluidState3& s, const RadField& I, const FluidState3& target,
                                          const RadField& J, const LayerGrid& grid, const ModelParams& params,
                                          const AngularQuadrature& quad, double rho_lo, double rho_hi, double C);

// Instantaneous remainder rates.
struct Remainders {
  std::array<double, 8> R{};       // R1..R8
  std::array<double, 6> direct{};  // the (rem) blocks evaluated as written
  double sum = 0.0;                // R1 + ... + R8
  double direct_sum = 0.0;
  double gravity_target = 0.0;     // int r grad phi_2D . (V - u)
  double target_residual = 0.0;    // R3 - gravity_target
};

// ctx3 and ctx2 are the 3D and planar contexts of the same scenario; gravity3 and gravity2 may be
// supplied to avoid recomputation. Throws std::invalid_argument without target time derivatives.
Remainders remainder_decomposition(const HydroContext& ctx3, const HydroContext& ctx2, const FluidState3& s,
                                   const RadField& I, const TargetSnapshot& target,
                                   const Eigen::ArrayX3d* gravity3 = nullptr,
                                   const Eigen::ArrayX3d* gravity2 = nullptr);

// Target norms entering the Gronwall rate.
struct Coefficients {
  double A = 0.0;  // sup |grad w|
  double B = 0.0;  // sup |d_t w + w . grad w|
  double C = 0.0;  // sup |grad p(r)| / r
  double D = 0.0;  // sup |div w|
  double E = 0.0;  // 1 + sup |w|
  double F = 0.0;  // sup |J|
  double K() const { return 1.0 + A + B + B * B + C + C * C + D + E * E + F + F * F; }
};
Coefficients target_coefficients(const HydroContext& ctx2, const TargetSnapshot& target);

// Horizontal derivatives of the target on omega, shared by the diagnostics.
Eigen::ArrayX2d pressure_gradient_2d(const HydroContext& ctx2, const Eigen::ArrayXd& r);

struct GronwallResult {
  std::vector<double> envelope;
  int first_violation = -1;
  double worst_ratio = 0.0;  // max entropy / envelope
  bool holds = true;
};
// envelope(t) = h(t) + int_0^t h K exp(int_s^t K) ds by trapezoidal accumulation.
GronwallResult gronwall_envelope(const std::vector<double>& t, const std::vector<double>& entropy,
                                 const std::vector<double>& K, const std::vector<double>& h,
                                 double rel_tol = 1e-12);

// int |grad_eps (u - V)|^2 with the cell gradients of the 3D scheme.
double gradient_gap(const HydroContext& ctx3, const Eigen::ArrayX3d& u, const Eigen::ArrayX3d& V);

struct EntropyRow {
  double t = 0.0;
  EntropyComponents E;
  std::array<double, 8> R{};
  double envelope = 0.0;
  double lb_margin = 0.0;
  double dg_min_flux = 0.0;
  double energy_violation = 0.0;
};

struct EntropyReport {
  std::vector<EntropyRow> rows;
  bool envelope_holds = true;
  bool lower_bound_holds = true;
  double max_entropy() const;
  double final_entropy() const;
};

extern const std::vector<std::string> kEntropyCsvColumns;

}  // namespace thinlayer
