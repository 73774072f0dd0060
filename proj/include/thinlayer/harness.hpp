#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinlayer/entropy.hpp"
#include "thinlayer/gravity.hpp"
#include "thinlayer/hydro.hpp"
#include "thinlayer/params.hpp"
#include "thinlayer/radiation.hpp"

namespace thinlayer {

enum class Recipe { Uniform, GaussianBump, RotatingPatch };

std::string to_string(Recipe r);
Recipe recipe_from_string(const std::string& s);

struct ScenarioConfig {
  int nx = 32, ny = 32, nz = 8;
  std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
  FroudeRegime regime = FroudeRegime::One;
  ModelParams params = ModelParams::for_regime(FroudeRegime::One);

  Recipe recipe = Recipe::GaussianBump;
  double alpha = 1.0;            // vertical perturbation amplitude, relative to eps
  double bump_amplitude = 0.5;   // r0 = 1 + A exp(-|x - c|^2 / (2 s^2))
  double bump_width = 0.1;
  double bump_x = 0.1, bump_y = 0.0;
  double patch_omega = 1.0;      // rotating patch angular velocity
  double noise = 0.0;            // seeded velocity noise amplitude (relative to eps)

  double t_end = 0.5;
  double cfl_acoustic = 0.4;
  double cfl_viscous = 0.5;
  double cfl_radiation = 0.9;

  bool radiation = true;
  int n_polar = 4, n_azimuth = 8;
  LateralRadiation lateral = LateralRadiation::Absorbing;

  // external source for Fr = 1
  double source_mass = 0.01, source_radius = 0.15;
  int source_nodes = 6;

  int diag_stride = 1;
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;
  // Defaults for a regime: gamma and eta follow the regime.
  static ScenarioConfig headline(FroudeRegime r);
};

nlohmann::json to_json(const ScenarioConfig& c);
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);

struct WellPrepared {
  FluidState3 state3;
  RadField rad3;
  FluidState2 state2;
  RadField rad2;
};

// 2D data from the recipe; 3D data is its extrusion plus an alpha*eps perturbation with zero column mean.
WellPrepared build_well_prepared(const ScenarioConfig& cfg, const LayerGrid& grid, const AngularQuadrature& quad);

// Smallness measures of the 2D initial data; the constant reference state uses the mean of r0.
struct InitialNorms {
  double e0 = 0.0;
  double E0 = 0.0;
};
InitialNorms initial_data_norms(const HydroContext& ctx2, const FluidState2& s, const RadField& J);

ExternalSource scenario_source(const ScenarioConfig& cfg);
HydroStep3Config scenario_step_config(const ScenarioConfig& cfg);

struct ScenarioResult {
  double eps = 0.0;
  FroudeRegime regime = FroudeRegime::One;
  double dt = 0.0;
  int steps = 0;
  int steps_done = 0;
  double runtime_s = 0.0;
  bool completed = false;
  std::string failure;

  EntropyReport report;
  std::vector<EnergyLedger> ledger3, ledger2;
  EnergyReport energy3, energy2;
  RadiationL2Report l2_3, l2_2;

  double dg_min = 0.0;           // smallest boundary flux over all steps, both solvers
  double mass_drift3 = 0.0, mass_drift2 = 0.0;  // max |M(t) - M0| / M0
  double rho_lo = 0.0, rho_hi = 0.0, lb_constant = 0.0;
  double lb_sample_margin = 0.0;   // on the 10^4-point grid
  double lb_snapshot_margin = 0.0; // min over snapshots
  GronwallResult gronwall;
  double entropy0 = 0.0, max_entropy = 0.0, final_entropy = 0.0;
  double w12_gap = 0.0;            // int_0^T int |grad_eps (u - V)|^2
  double max_split_gap = 0.0;      // max |sum R - sum direct|
  double max_target_residual = 0.0;
  double max_grad_w = 0.0;         // 2D smoothness indicator
  int total_halvings = 0;
  double clip_mass = 0.0;
  InitialNorms norms;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg, double eps);

struct SweepResult {
  std::vector<ScenarioResult> entries;
  bool entropy_decreasing = false;
  bool w12_decreasing = false;
  double final_ratio = 0.0;  // max E(eps_last) / max E(eps_first)
  double runtime_s = 0.0;
  bool all_completed = false;
  bool verdict = false;      // decreasing sequences and every run completed
};

SweepResult run_epsilon_sweep(const ScenarioConfig& cfg);

enum class ManufacturedSolver { Hydro2D, Transport2D };

struct ManufacturedResult {
  std::vector<int> levels;
  std::vector<double> h;
  std::vector<double> error;
  double order = 0.0;  // least-squares slope of log error against log h
};

// levels are the cells per side; constant = true uses a constant exact solution.
ManufacturedResult manufactured_convergence(ManufacturedSolver solver, const std::vector<int>& levels,
                                            bool constant = false);

double fitted_order(const std::vector<double>& h, const std::vector<double>& err);

// Gravity kernel limits on the unit disk (32x32 columns over [-1,1]^2, r = 1) at three sample columns.
struct KernelSuite {
  KernelLimitReport g3, g4;
  double g4_relative_excess = 0.0;  // |final gap vs oracle - self gap| / self gap
  bool g3_decreasing = false;
  bool g4_decreasing = false;
  bool g4_within = false;           // relative excess <= 0.05
  bool verdict = false;
};
KernelSuite run_kernel_suite(const std::vector<double>& eps, int n = 32, int nz = 8);

// Files of one run: entropy CSV/JSON and ledger CSV under dir, named by eps and regime.
std::vector<std::string> write_scenario_outputs(const ScenarioResult& r, const ScenarioConfig& cfg,
                                                const std::string& dir);
nlohmann::json summary_json(const SweepResult& s, const ScenarioConfig& cfg);
nlohmann::json scenario_json(const ScenarioResult& r);

}  // namespace thinlayer
