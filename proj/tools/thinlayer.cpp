// Command-line driver: run, sweep, verify, kernels.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "thinlayer/harness.hpp"
#include "thinlayer/io.hpp"

using namespace thinlayer;

namespace {

struct Options {
  std::string config;
  std::string eps;
  std::string regime;
  std::string out;
  std::string grid;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  return v;
}

ScenarioConfig make_config(const Options& o) {
  ScenarioConfig c = o.config.empty() ? ScenarioConfig::headline(FroudeRegime::One) : load_config(o.config);
  if (!o.regime.empty()) {
    const FroudeRegime r = regime_from_string(o.regime);
    const ModelParams d = ModelParams::for_regime(r);
    c.regime = r;
    c.params.regime = r;
    c.params.eta = d.eta;
    c.params.gamma = d.gamma;
  }
  if (!o.eps.empty()) c.eps = parse_list(o.eps);
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.grid.empty()) {
    const auto g = parse_list(o.grid);
    if (g.size() != 3) throw std::invalid_argument("--grid expects NX,NY,NZ");
    c.nx = static_cast<int>(g[0]);
    c.ny = static_cast<int>(g[1]);
    c.nz = static_cast<int>(g[2]);
  }
  c.validate();
  return c;
}

nlohmann::json run_checks(const ScenarioResult& r) {
  return {{"completed", r.completed},
          {"energy_inequality", r.energy3.holds && r.energy2.holds},
          {"boundary_flux", r.dg_min >= -1e-10},
          {"radiation_l2", r.l2_3.holds && r.l2_2.holds},
          {"entropy_lower_bound", r.report.lower_bound_holds},
          {"gronwall_envelope", r.gronwall.holds}};
}

bool all_true(const nlohmann::json& checks) {
  for (const auto& [k, v] : checks.items())
    if (!v.get<bool>()) return false;
  return true;
}

void print_run(const ScenarioResult& r) {
  std::printf("%-5s eps=%-5g steps=%-5d maxE=%.6e finalE=%.6e w12=%.6e %s (%.1fs)\n", to_string(r.regime).c_str(),
              r.eps, r.steps_done, r.max_entropy, r.final_entropy, r.w12_gap,
              r.completed ? "ok" : ("FAILED: " + r.failure).c_str(), r.runtime_s);
}

int cmd_run(const Options& o) {
  ScenarioConfig c = make_config(o);
  const ScenarioResult r = run_scenario(c, c.eps.front());
  print_run(r);
  write_scenario_outputs(r, c, c.out_dir);
  nlohmann::json checks = run_checks(r);
  nlohmann::json s = {{"version", version_string()}, {"config", to_json(c)}, {"run", scenario_json(r)},
                      {"checks", checks}};
  const bool ok = all_true(checks);
  s["verdict"] = ok;
  write_json((std::filesystem::path(c.out_dir) / "summary.json").string(), s);
  return ok ? 0 : 1;
}

int cmd_sweep(const Options& o) {
  ScenarioConfig c = make_config(o);
  const SweepResult sw = run_epsilon_sweep(c);
  nlohmann::json s = summary_json(sw, c);
  bool per_run = true;
  for (const auto& r : sw.entries) {
    print_run(r);
    write_scenario_outputs(r, c, c.out_dir);
    per_run = per_run && all_true(run_checks(r));
  }
  s["checks"]["per_run"] = per_run;
  s["checks"]["ratio_at_most_0.3"] = sw.final_ratio <= 0.3;
  const bool ok = sw.verdict && per_run && sw.final_ratio <= 0.3;
  s["verdict"] = ok;
  write_json((std::filesystem::path(c.out_dir) / "summary.json").string(), s);
  std::printf("max entropy decreasing: %s, w12 gap decreasing: %s, ratio last/first: %.4f\n",
              sw.entropy_decreasing ? "yes" : "no", sw.w12_decreasing ? "yes" : "no", sw.final_ratio);
  return ok ? 0 : 1;
}

int cmd_verify(const Options& o) {
  const std::string out = o.out.empty() ? "out" : o.out;
  std::filesystem::create_directories(out);
  nlohmann::json checks, detail;
  auto one = [&](const char* name, ManufacturedSolver solver, const std::vector<int>& levels) {
    const ManufacturedResult m = manufactured_convergence(solver, levels);
    const ManufacturedResult z = manufactured_convergence(solver, levels, true);
    std::printf("%-12s order %.3f errors", name, m.order);
    for (double e : m.error) std::printf(" %.3e", e);
    std::printf("\n");
    detail[name] = {{"levels", m.levels}, {"error", m.error}, {"order", m.order}, {"constant_error", z.error}};
    checks[std::string(name) + "_order"] = m.order >= 0.8;
    bool zero = true;
    for (double e : z.error) zero = zero && e == 0.0;
    checks[std::string(name) + "_constant"] = zero;
  };
  one("hydro2d", ManufacturedSolver::Hydro2D, {16, 32, 64});
  one("transport2d", ManufacturedSolver::Transport2D, {32, 64, 128});

  // invariant suite: uniform equilibrium, no vertical perturbation, short horizon
  ScenarioConfig u = make_config(o);
  u.recipe = Recipe::Uniform;
  u.alpha = 0.0;
  u.source_mass = 0.0;
  u.t_end = 0.02;
  const ScenarioResult r = run_scenario(u, u.eps.front());
  checks["uniform_entropy"] = r.completed && r.max_entropy <= 1e-10;
  checks["uniform_mass"] = r.mass_drift3 <= 1e-13 && r.mass_drift2 <= 1e-13;
  for (const auto& [k, v] : run_checks(r).items()) checks["uniform_" + k] = v;
  detail["uniform"] = scenario_json(r);

  const bool ok = all_true(checks);
  write_json((std::filesystem::path(out) / "summary.json").string(),
             {{"version", version_string()}, {"checks", checks}, {"detail", detail}, {"verdict", ok}});
  for (const auto& [k, v] : checks.items()) std::printf("%-28s %s\n", k.c_str(), v.get<bool>() ? "pass" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_kernels(const Options& o) {
  const std::string out = o.out.empty() ? "out" : o.out;
  std::filesystem::create_directories(out);
  const std::vector<double> eps = o.eps.empty() ? std::vector<double>{0.4, 0.2, 0.1, 0.05} : parse_list(o.eps);
  const KernelSuite k = run_kernel_suite(eps);
  std::printf("eps        G3 gap        G4 gap        G4 vs oracle\n");
  for (size_t i = 0; i < eps.size(); ++i)
    std::printf("%-10g %-13.6e %-13.6e %.6e\n", eps[i], k.g3.gap[i], k.g4.gap[i], k.g4.gap_vs_oracle[i]);
  std::printf("oracle self-convergence gap %.6e, final relative excess %.4f\n", k.g4.self_gap, k.g4_relative_excess);
  nlohmann::json checks = {{"g3_decreasing", k.g3_decreasing},
                           {"g4_decreasing", k.g4_decreasing},
                           {"g4_within_5pct", k.g4_within}};
  write_json((std::filesystem::path(out) / "summary.json").string(),
             {{"version", version_string()},
              {"eps", eps},
              {"g3_gap", k.g3.gap},
              {"g3_literal", k.g3.literal},
              {"g4_gap", k.g4.gap},
              {"g4_gap_vs_oracle", k.g4.gap_vs_oracle},
              {"g4_self_gap", k.g4.self_gap},
              {"g4_relative_excess", k.g4_relative_excess},
              {"checks", checks},
              {"verdict", k.verdict}});
  return k.verdict ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thin rotating radiative gas layer: 3D solver, 2D limit and relative entropy diagnostics"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--eps", o.eps, "comma-separated eps list");
    sub->add_option("--regime", o.regime, "fr1 or freps")->check(CLI::IsMember({"fr1", "freps"}));
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--grid", o.grid, "NX,NY,NZ");
  };
  auto* run = app.add_subcommand("run", "one scenario at the first eps");
  auto* sweep = app.add_subcommand("sweep", "eps sweep with summary");
  auto* verify = app.add_subcommand("verify", "manufactured solutions and invariant suites");
  auto* kernels = app.add_subcommand("kernels", "gravity kernel limit reports");
  for (auto* s : {run, sweep, verify, kernels}) add_common(s);
  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*verify) return cmd_verify(o);
    if (*kernels) return cmd_kernels(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
