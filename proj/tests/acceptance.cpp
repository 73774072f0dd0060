// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "thinlayer/constitutive.hpp"
#include "thinlayer/harness.hpp"
#include "thinlayer/io.hpp"

using namespace thinlayer;
namespace fs = std::filesystem;

namespace {

constexpr double kRatioMax = 0.3;
constexpr double kRuntimeMax = 600.0;        // seconds, both headline sweeps
constexpr double kAlphaScalingTol = 0.10;    // |E(0.1)/E(0.05) / 4 - 1|
constexpr double kEnergyTolScale = 10.0;     // tolerance 10 (dt + h) E(0), applied inside the runs
constexpr double kFluxFloor = -1e-10;
constexpr double kKernelRelTol = 0.05;
constexpr double kMassTol = 1e-13;           // relative, per 1000 steps
constexpr int kMassSteps = 1000;
constexpr double kSpecularTol = 1e-10;       // relative, per 100 steps
constexpr int kSpecularSteps = 100;
constexpr double kOrderMin = 0.8;
constexpr double kFixedPointTol = 1e-12;
constexpr int kFixedPointSteps = 10;

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

ModelParams quiet() {
  ModelParams p;
  p.G = 0.0;
  p.chi = 0.0;
  return p;
}

FluidState3 smooth_state(const LayerGrid& g) {
  FluidState3 s = FluidState3::zeros(g);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const double x = g.xc(i), y = g.yc(j), z = g.zc(k);
        const double w = std::cos(M_PI * x) * std::cos(M_PI * y);
        const int n = g.index(i, j, k);
        s.rho(n) = 1.0 + 0.3 * std::sin(2 * x + 0.4) * std::cos(3 * y - 0.2) + 0.1 * z;
        s.u(n, 0) = 0.3 * w * w * std::sin(M_PI * (y + 0.1));
        s.u(n, 1) = 0.3 * w * w * std::cos(M_PI * (x - 0.3));
        s.u(n, 2) = 0.15 * w * std::sin(M_PI * z);
      }
  return s;
}

double total_intensity(const RadField& I, const LayerGrid& g, const AngularQuadrature& q) {
  double s = 0.0;
  for (int m = 0; m < q.size(); ++m) s += q.w(m) * integrate3(g, Eigen::ArrayXd(I.I.col(m)));
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "thinlayer_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  std::printf("%s, outputs under %s\n", version_string().c_str(), root.string().c_str());

  // headline sweeps, reused by 3-6 and 11
  std::vector<ScenarioConfig> cfgs;
  std::vector<SweepResult> sweeps;
  for (FroudeRegime reg : {FroudeRegime::One, FroudeRegime::SqrtEps}) {
    ScenarioConfig c = ScenarioConfig::headline(reg);
    c.out_dir = (root / ("sweep_" + to_string(reg))).string();
    fs::create_directories(c.out_dir);
    SweepResult s = run_epsilon_sweep(c);
    for (const ScenarioResult& r : s.entries) {
      write_scenario_outputs(r, c, c.out_dir);
      std::printf("  %-5s eps=%-5g steps=%-5d maxE=%.4e w12=%.4e %s (%.1fs)\n", to_string(reg).c_str(), r.eps,
                  r.steps_done, r.max_entropy, r.w12_gap, r.completed ? "ok" : r.failure.c_str(), r.runtime_s);
    }
    write_json((fs::path(c.out_dir) / "summary.json").string(), summary_json(s, c));
    cfgs.push_back(c);
    sweeps.push_back(std::move(s));
  }

  // 1
  {
    bool ok = true;
    double runtime = 0.0;
    std::string d;
    for (size_t i = 0; i < sweeps.size(); ++i) {
      const SweepResult& s = sweeps[i];
      runtime += s.runtime_s;
      ok = ok && s.all_completed && s.entropy_decreasing && s.final_ratio <= kRatioMax;
      d += fmt("%s decreasing=%d ratio=%.4f; ", to_string(cfgs[i].regime).c_str(), int(s.entropy_decreasing),
               s.final_ratio);
    }
    ok = ok && runtime <= kRuntimeMax;
    report(1, ok, "eps-convergence of max relative entropy", d + fmt("runtime %.1fs (max %.0fs)", runtime, kRuntimeMax));
  }

  // 2
  {
    bool ok = true;
    double worst = 0.0;
    for (FroudeRegime reg : {FroudeRegime::One, FroudeRegime::SqrtEps}) {
      ScenarioConfig c = ScenarioConfig::headline(reg);
      const AngularQuadrature q = AngularQuadrature::product(c.n_polar, c.n_azimuth);
      for (double eps : c.eps) {
        const LayerGrid g = LayerGrid::unit_square(c.nx, c.ny, c.nz, eps);
        double e[2];
        int n = 0;
        for (double a : {0.1, 0.05}) {
          c.alpha = a;
          const WellPrepared w = build_well_prepared(c, g, q);
          const auto ex = extrude_2d_to_3d(w.state2, w.rad2, g);
          e[n++] = relative_entropy(w.state3, w.rad3, ex.first, ex.second, g, c.params, q).total;
        }
        const double dev = std::abs(e[0] / e[1] / 4.0 - 1.0);
        worst = std::max(worst, dev);
        ok = ok && dev <= kAlphaScalingTol;
      }
    }
    report(2, ok, "well-prepared alpha^2 scaling", fmt("worst |ratio/4 - 1| = %.3e (tol %.2f)", worst, kAlphaScalingTol));
  }

  // 3-6 over every headline run
  {
    bool e = true, dg = true, l2 = true, lb = true;
    double worst_viol = 0.0, dg_min = INFINITY, l2_margin = INFINITY, lb_sample = INFINITY, lb_snap = INFINITY;
    for (const SweepResult& s : sweeps)
      for (const ScenarioResult& r : s.entries) {
        e = e && r.completed && r.energy3.holds && r.energy2.holds;
        for (double v : r.energy3.violation) worst_viol = std::max(worst_viol, v);
        for (double v : r.energy2.violation) worst_viol = std::max(worst_viol, v);
        dg_min = std::min(dg_min, r.dg_min);
        dg = dg && r.completed && r.dg_min >= kFluxFloor;
        l2 = l2 && r.completed && r.l2_3.holds && r.l2_2.holds;
        l2_margin = std::min({l2_margin, r.l2_3.worst_margin, r.l2_2.worst_margin});
        lb_sample = std::min(lb_sample, r.lb_sample_margin);
        lb_snap = std::min(lb_snap, r.lb_snapshot_margin);
        lb = lb && r.completed && r.report.lower_bound_holds && r.lb_sample_margin >= 0.0 && r.lb_snapshot_margin >= 0.0;
      }
    report(3, e, "energy inequality at every step",
           fmt("max excess beyond %g(dt+h)E(0) = %.3e", kEnergyTolScale, worst_viol));
    report(4, dg, "boundary flux nonnegative", fmt("min per-face flux %.3e (floor %.0e)", dg_min, kFluxFloor));
    report(5, l2, "radiation L2 bound", fmt("worst margin %.3e", l2_margin));
    report(6, lb, "entropy lower bound",
           fmt("worst margin: sampling grid %.3e, snapshots %.3e", lb_sample, lb_snap));
  }

  // 7
  {
    const KernelSuite k = run_kernel_suite({0.4, 0.2, 0.1, 0.05});
    std::string g3, g4;
    for (double v : k.g3.gap) g3 += fmt(" %.3e", v);
    for (double v : k.g4.gap) g4 += fmt(" %.3e", v);
    const bool ok = k.g3_decreasing && k.g4_decreasing && k.g4_relative_excess <= kKernelRelTol;
    report(7, ok, "kernel limits",
           fmt("G3 gaps%s (%s); G4 gaps%s (%s); G4 final vs oracle %.3e, oracle self gap %.3e, relative excess %.3f (tol %.2f)",
               g3.c_str(), k.g3_decreasing ? "decreasing" : "not decreasing", g4.c_str(),
               k.g4_decreasing ? "decreasing" : "not decreasing", k.g4.gap_vs_oracle.back(), k.g4.self_gap,
               k.g4_relative_excess, kKernelRelTol));
  }

  // 8
  {
    const AngularQuadrature q = AngularQuadrature::product(2, 4);
    const LayerGrid g = LayerGrid::unit_square(16, 16, 4, 0.2);
    const ModelParams p;  // rotation, gravity and radiation on
    const HydroContext c3 = HydroContext::make3d(g, p, q);
    FluidState3 s = smooth_state(g);
    RadField I = equilibrium_field(s.rho, q, p.opacities);
    const double M0 = integrate3(g, s.rho);
    const double dt = 0.5 * stable_dt3d(s, c3);
    for (int n = 0; n < kMassSteps; ++n) {
      Coupled3 a = advance3d(s, I, c3, dt, n * dt);
      s = std::move(a.state);
      I = std::move(a.rad);
    }
    const double d3 = std::abs(integrate3(g, s.rho) - M0) / M0;

    const HydroContext c2 = HydroContext::make2d(g, p, q);
    FluidState2 s2 = column_average_state(smooth_state(g), g);
    RadField J = equilibrium_field(s2.r, q, p.opacities);
    const double m0 = integrate2(c2.grid, s2.r);
    const double dt2 = 0.5 * stable_dt2d(s2, c2);
    for (int n = 0; n < kMassSteps; ++n) {
      Coupled2 a = advance2d(s2, J, c2, dt2, n * dt2);
      s2 = std::move(a.state);
      J = std::move(a.rad);
    }
    const double d2 = std::abs(integrate2(c2.grid, s2.r) - m0) / m0;

    // specular walls everywhere, no emission or absorption
    const AngularQuadrature qr = AngularQuadrature::product(4, 8);
    FluidState3 bg = FluidState3::zeros(g);
    bg.rho.setOnes();
    RadField R = RadField::zeros(g.num_cells(), qr.size(), 1);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (Eigen::Index i = 0; i < R.I.size(); ++i) R.I.data()[i] = U(rng);
    TransportConfig tc;
    tc.lateral = LateralRadiation::Specular;
    tc.sources = false;
    const double r0 = total_intensity(R, g, qr);
    const double rdt = 0.9 * radiation_stable_dt(g, qr, false);
    for (int n = 0; n < kSpecularSteps; ++n) R = transport_step_3d(R, bg, g, qr, Opacities{}, rdt, tc);
    const double dr = std::abs(total_intensity(R, g, qr) - r0) / r0;

    report(8, d3 <= kMassTol && d2 <= kMassTol && dr <= kSpecularTol, "conservation",
           fmt("mass drift over %d steps: 3D %.2e, 2D %.2e (tol %.0e); specular int I over %d steps %.2e (tol %.0e)",
               kMassSteps, d3, d2, kMassTol, kSpecularSteps, dr, kSpecularTol));
  }

  // 9
  {
    const ManufacturedResult h = manufactured_convergence(ManufacturedSolver::Hydro2D, {16, 32, 64});
    const ManufacturedResult t = manufactured_convergence(ManufacturedSolver::Transport2D, {32, 64, 128});
    report(9, h.order >= kOrderMin && t.order >= kOrderMin, "manufactured-solution order",
           fmt("hydro2d %.3f (%.2e %.2e %.2e), transport2d %.3f (%.2e %.2e %.2e), min %.1f", h.order, h.error[0],
               h.error[1], h.error[2], t.order, t.error[0], t.error[1], t.error[2], kOrderMin));
  }

  // 10
  {
    const AngularQuadrature q = AngularQuadrature::product(4, 8);
    const LayerGrid g = LayerGrid::unit_square(16, 16, 4, 0.2);
    HydroContext c3 = HydroContext::make3d(g, quiet(), q);
    c3.config.transport.lateral = LateralRadiation::Specular;
    HydroContext c2 = HydroContext::make2d(g, quiet(), q);
    c2.config.transport.lateral = LateralRadiation::Specular;
    double worst = 0.0;
    for (double rho : {0.7, 1.0, 1.3}) {
      FluidState3 s = FluidState3::zeros(g);
      s.rho.setConstant(rho);
      RadField I = equilibrium_field(s.rho, q, c3.params.opacities);
      const double dt = stable_dt3d(s, c3);
      for (int n = 0; n < kFixedPointSteps; ++n) {
        Coupled3 a = advance3d(s, I, c3, dt, n * dt);
        worst = std::max({worst, (a.state.rho - s.rho).abs().maxCoeff(), (a.state.u - s.u).abs().maxCoeff(),
                          (a.rad.I - I.I).abs().maxCoeff()});
        s = std::move(a.state);
        I = std::move(a.rad);
      }
      FluidState2 s2 = FluidState2::zeros(c2.grid);
      s2.r.setConstant(rho);
      RadField J = equilibrium_field(s2.r, q, c2.params.opacities);
      const double dt2 = stable_dt2d(s2, c2);
      for (int n = 0; n < kFixedPointSteps; ++n) {
        Coupled2 a = advance2d(s2, J, c2, dt2, n * dt2);
        worst = std::max({worst, (a.state.r - s2.r).abs().maxCoeff(), (a.state.w - s2.w).abs().maxCoeff(),
                          (a.rad.I - J.I).abs().maxCoeff()});
        s2 = std::move(a.state);
        J = std::move(a.rad);
      }
    }
    report(10, worst <= kFixedPointTol, "uniform equilibrium is a fixed point",
           fmt("max per-step change %.2e (tol %.0e)", worst, kFixedPointTol));
  }

  // 11: rerun the two largest eps of each headline sweep and compare the CSV bytes
  {
    bool ok = true;
    int compared = 0;
    for (const ScenarioConfig& c0 : cfgs) {
      ScenarioConfig c = c0;
      c.eps = {c0.eps[0], c0.eps[1]};
      const fs::path dir = root / ("rerun_" + to_string(c.regime));
      fs::create_directories(dir);
      for (double eps : c.eps) {
        const ScenarioResult r = run_scenario(c, eps);
        for (const std::string& f : write_scenario_outputs(r, c0, dir.string())) {
          if (fs::path(f).extension() != ".csv") continue;
          const std::string orig = (fs::path(c0.out_dir) / fs::path(f).filename()).string();
          ok = ok && fs::exists(orig) && slurp(orig) == slurp(f);
          ++compared;
        }
      }
    }
    report(11, ok && compared > 0, "deterministic reruns",
           fmt("%d CSV files compared byte for byte (eps 0.4 and 0.2, both regimes)", compared));
  }

  std::printf("%d of 11 criteria failed\n", failures);
  return failures;
}
