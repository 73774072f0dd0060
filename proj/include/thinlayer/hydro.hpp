#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thinlayer/gravity.hpp"
#include "thinlayer/gravity_operator.hpp"
#include "thinlayer/grid.hpp"
#include "thinlayer/params.hpp"
#include "thinlayer/radiation.hpp"

namespace thinlayer {

struct HydroStep3Config {
  double cfl_acoustic = 0.4;
  double cfl_viscous = 0.5;
  double cfl_radiation = 0.9;
  int max_halvings = 5;
  double vacuum_floor = 1e-12;
  bool radiation_momentum = true;  // S_F in the momentum balance
  TransportConfig transport;

  void validate() const;
};

struct EnergyLedger {
  double t = 0.0;   // time at the end of the step
  double dt = 0.0;
  double kinetic = 0.0;    // 1/2 int rho |u|^2 at t
  double potential = 0.0;  // int H(rho) at t
  double radiative = 0.0;  // E_R at t
  // integrated over the step
  double dissipation = 0.0;
  double work_gravity = 0.0;
  double work_centrifugal = 0.0;
  double work_coriolis = 0.0;
  double work_radiation = 0.0;
  double radiation_source = 0.0;
  double radiation_outflow = 0.0;
  double clip_mass = 0.0;
  int halvings = 0;

  double total() const { return kinetic + potential + radiative; }
  double work() const { return work_gravity + work_centrifugal + work_coriolis + work_radiation; }
};

class StepFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Extra right-hand side (mass, momentum) evaluated at time t; used by manufactured solutions.
using Forcing = std::function<void(double t, const LayerGrid& grid, Eigen::ArrayXd& mass, Eigen::ArrayX3d& momentum)>;

// Everything a solver needs besides the state. planar = true runs the target system on omega.
struct HydroContext {
  LayerGrid grid;  // planar contexts hold the planar grid
  ModelParams params;
  AngularQuadrature quad;
  HydroStep3Config config;
  bool planar = false;
  ExternalSource source = ExternalSource::none();
  Forcing forcing;

  std::shared_ptr<const SelfGravityOperator> selfgrav;
  Eigen::ArrayXXd external_force;  // per cell (3 columns), Fr = 1 only

  static HydroContext make3d(const LayerGrid& grid, const ModelParams& params, const AngularQuadrature& quad,
                             const ExternalSource& source = ExternalSource::none(), const HydroStep3Config& cfg = {});
  static HydroContext make2d(const LayerGrid& grid, const ModelParams& params, const AngularQuadrature& quad,
                             const ExternalSource& source = ExternalSource::none(), const HydroStep3Config& cfg = {});

  int ncells() const { return grid.num_cells(); }
  double cell_volume() const { return planar ? grid.column_area() : grid.cell_volume(); }
};

// Force per unit mass from gravity (Phi_1 or Phi_2 in 3D; single layer or external in 2D); 3 columns.
Eigen::ArrayX3d gravity_force(const HydroContext& ctx, const Eigen::ArrayXd& rho);
// Centrifugal acceleration at every cell; 3 columns.
Eigen::ArrayX3d centrifugal_force(const HydroContext& ctx);

// Velocity gradient at cell centres with ghost values, G(i,j) = d_j u_i (vertical scaled by 1/eps);
// row c holds G in column-major order.
Eigen::ArrayXXd cell_gradients(const HydroContext& ctx, const Eigen::ArrayX3d& u);
Eigen::Matrix3d gradient_at(const Eigen::ArrayXXd& grads, int c);

// Discrete div S(grad u) per cell from face stresses; the viscous part of the momentum balance.
Eigen::ArrayX3d viscous_divergence(const HydroContext& ctx, const Eigen::ArrayX3d& u);

// Smallest C with -sum vol u . viscous_divergence(u) >= C sum vol |u|^2 over active cells (the discrete
// Korn-Poincare constant). Dense eigenvalue problem; meant for small grids.
double korn_constant(const HydroContext& ctx);

// d(rho)/dt and d(rho u)/dt of the semi-discrete scheme.
struct Rhs {
  Eigen::ArrayXd mass;
  Eigen::ArrayX3d momentum;
};
Rhs hydro_rhs(const HydroContext& ctx, const Eigen::ArrayXd& rho, const Eigen::ArrayX3d& u,
              const Eigen::ArrayXXd& rad_momentum, double t, const Eigen::ArrayX3d* gravity = nullptr);

double stable_dt(const HydroContext& ctx, const Eigen::ArrayXd& rho, const Eigen::ArrayX3d& u);
double stable_dt3d(const FluidState3& s, const HydroContext& ctx);
double stable_dt2d(const FluidState2& s, const HydroContext& ctx);

// Forward Euler hydro update with S_F taken from rad; the radiation field itself is not advanced.
// gravity, when given, is gravity_force at the initial density and saves one evaluation.
std::pair<FluidState3, EnergyLedger> step3d(const FluidState3& state, const RadField& rad, const HydroContext& ctx,
                                            double dt, double t = 0.0, const Eigen::ArrayX3d* gravity = nullptr);
std::pair<FluidState2, EnergyLedger> step2d(const FluidState2& state, const RadField& J, const HydroContext& ctx,
                                            double dt, double t = 0.0, const Eigen::ArrayX3d* gravity = nullptr);

// Hydro step followed by the radiation substeps (operator splitting); fills every ledger entry.
struct Coupled3 {
  FluidState3 state;
  RadField rad;
  EnergyLedger ledger;
  TransportDiagnostics rad_diag;
};
struct Coupled2 {
  FluidState2 state;
  RadField rad;
  EnergyLedger ledger;
  TransportDiagnostics rad_diag;
};
Coupled3 advance3d(const FluidState3& state, const RadField& rad, const HydroContext& ctx, double dt, double t = 0.0,
                   const Eigen::ArrayX3d* gravity = nullptr);
Coupled2 advance2d(const FluidState2& state, const RadField& J, const HydroContext& ctx, double dt, double t = 0.0,
                   const Eigen::ArrayX3d* gravity = nullptr);

// Energy terms of a state without advancing it.
EnergyLedger energy_snapshot(const HydroContext& ctx, const Eigen::ArrayXd& rho, const Eigen::ArrayX3d& u,
                             const RadField& rad);

struct EnergyReport {
  std::vector<double> lhs;  // E(t) + cumulative dissipation
  std::vector<double> rhs;  // E(0) + cumulative work + radiation source
  std::vector<double> violation;  // max(0, lhs - rhs - tol)
  double tolerance = 0.0;
  int first_violation = -1;  // index of the offending step, -1 if none
  bool holds = true;
};

// initial: energy terms at t = 0; series: one ledger per step. Tolerance tol_scale * (dt + h) * E(0).
EnergyReport energy_monitor(const EnergyLedger& initial, const std::vector<EnergyLedger>& series, double h,
                            double tol_scale = 10.0);

std::pair<FluidState3, RadField> extrude_2d_to_3d(const FluidState2& state, const RadField& J, const LayerGrid& grid);
FluidState2 column_average_state(const FluidState3& state, const LayerGrid& grid);
RadField column_average_rad(const RadField& rad, const LayerGrid& grid);

FluidState3 to_state3(const FluidState2& s);
FluidState2 to_state2(const FluidState3& s);

}  // namespace thinlayer
