#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "thinlayer/harness.hpp"
#include "thinlayer/io.hpp"

using namespace thinlayer;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thinlayer_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ScenarioConfig tiny() {
  ScenarioConfig c = ScenarioConfig::headline(FroudeRegime::One);
  c.nx = c.ny = 8;
  c.nz = 4;
  c.eps = {0.4, 0.2};
  c.t_end = 0.02;
  c.n_polar = 2;
  c.n_azimuth = 4;
  return c;
}

double initial_entropy(ScenarioConfig c, double eps) {
  const LayerGrid g = LayerGrid::unit_square(c.nx, c.ny, c.nz, eps);
  const AngularQuadrature q = AngularQuadrature::product(c.n_polar, c.n_azimuth);
  const WellPrepared w = build_well_prepared(c, g, q);
  const auto ex = extrude_2d_to_3d(w.state2, w.rad2, g);
  return relative_entropy(w.state3, w.rad3, ex.first, ex.second, g, c.params, q).total;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(ScenarioConfig::headline(FroudeRegime::One).validate());
  CHECK_NOTHROW(ScenarioConfig::headline(FroudeRegime::SqrtEps).validate());
  auto bad = [](auto edit) {
    ScenarioConfig c = ScenarioConfig::headline(FroudeRegime::One);
    edit(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](ScenarioConfig& c) { c.nx = 0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](ScenarioConfig& c) { c.eps = {0.2, 0.4}; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](ScenarioConfig& c) { c.eps = {0.2, 0.0}; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](ScenarioConfig& c) { c.t_end = 0.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](ScenarioConfig& c) { c.cfl_acoustic = 1.5; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](ScenarioConfig& c) { c.n_polar = 3; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](ScenarioConfig& c) { c.n_azimuth = 6; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](ScenarioConfig& c) { c.diag_stride = 0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](ScenarioConfig& c) { c.regime = FroudeRegime::SqrtEps; }).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(recipe_from_string("blob"), std::invalid_argument);
  for (Recipe r : {Recipe::Uniform, Recipe::GaussianBump, Recipe::RotatingPatch})
    CHECK(recipe_from_string(to_string(r)) == r);
}

TEST_CASE("config json round trip") {
  ScenarioConfig c = ScenarioConfig::headline(FroudeRegime::SqrtEps);
  c.nx = 12;
  c.eps = {0.3, 0.1};
  c.recipe = Recipe::RotatingPatch;
  c.noise = 0.25;
  c.seed = 99;
  c.lateral = LateralRadiation::Specular;
  const nlohmann::json j = to_json(c);
  const ScenarioConfig d = config_from_json(j);
  CHECK(to_json(d) == j);

  nlohmann::json extra = j;
  extra["grid_size"] = 3;
  CHECK_THROWS(config_from_json(extra));

  const fs::path dir = scratch("cfg");
  {
    std::ofstream f(dir / "c.json");
    f << "// comment\n" << j.dump(2) << "\n";
  }
  CHECK(to_json(load_config((dir / "c.json").string())) == j);
}

TEST_CASE("well-prepared data") {
  ScenarioConfig c = tiny();
  const LayerGrid g = LayerGrid::unit_square(c.nx, c.ny, c.nz, 0.2);
  const AngularQuadrature q = AngularQuadrature::product(c.n_polar, c.n_azimuth);
  const WellPrepared w = build_well_prepared(c, g, q);
  // the perturbation has zero column mean exactly
  const FluidState2 avg = column_average_state(w.state3, g);
  CHECK((avg.r - w.state2.r).abs().maxCoeff() == 0.0);
  CHECK(w.state3.rho.minCoeff() > 0.0);

  c.alpha = 0.0;
  CHECK(initial_entropy(c, 0.2) == 0.0);

  // E(0) ~ alpha^2 on the uniform background
  c.recipe = Recipe::Uniform;
  c.alpha = 0.1;
  const double e1 = initial_entropy(c, 0.2);
  c.alpha = 0.05;
  const double e2 = initial_entropy(c, 0.2);
  CHECK(e1 > 0.0);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));

  // and on the headline bump
  c.recipe = Recipe::GaussianBump;
  c.alpha = 0.1;
  const double b1 = initial_entropy(c, 0.2);
  c.alpha = 0.05;
  CHECK(b1 / initial_entropy(c, 0.2) == doctest::Approx(4.0).epsilon(0.1));

  ScenarioConfig n = tiny();
  n.alpha = 0.0;
  n.noise = 0.3;
  const WellPrepared wn = build_well_prepared(n, g, q);
  const FluidState2 an = column_average_state(wn.state3, g);
  CHECK((an.w - wn.state2.w).abs().maxCoeff() <= 1e-15);
  CHECK(wn.state3.u.col(2).abs().maxCoeff() == 0.0);  // horizontal noise only
  CHECK(wn.state3.u.col(0).abs().maxCoeff() > 0.0);
}

TEST_CASE("initial norms") {
  ScenarioConfig c = tiny();
  c.recipe = Recipe::Uniform;
  const LayerGrid g = LayerGrid::unit_square(c.nx, c.ny, c.nz, 0.2);
  const AngularQuadrature q = AngularQuadrature::product(c.n_polar, c.n_azimuth);
  const HydroContext ctx2 = HydroContext::make2d(g, c.params, q);
  const WellPrepared w = build_well_prepared(c, g, q);
  const InitialNorms n = initial_data_norms(ctx2, w.state2, w.rad2);
  // the mean of r is an area-weighted sum, so only roundoff survives
  CHECK(n.e0 <= 1e-14);
  CHECK(n.E0 <= 1e-14);
  c.recipe = Recipe::GaussianBump;
  const WellPrepared b = build_well_prepared(c, g, q);
  CHECK(initial_data_norms(ctx2, b.state2, b.rad2).e0 > 0.0);
}

TEST_CASE("csv and json round trip") {
  EntropyReport rep;
  for (int i = 0; i < 5; ++i) {
    EntropyRow r;
    r.t = 0.1 * i;
    r.E.kinetic = std::exp(-i) / 3.0;
    r.E.pressure = 1e-17 * i;
    r.E.radiative = M_PI * i;
    r.E.total = r.E.kinetic + r.E.pressure + r.E.radiative;
    for (int k = 0; k < 8; ++k) r.R[k] = std::sin(i + k) * 1e-9;
    r.envelope = 2.0 / 7.0;
    r.lb_margin = -0.0;
    r.dg_min_flux = 1e300;
    r.energy_violation = 0.0;
    rep.rows.push_back(r);
  }
  const fs::path dir = scratch("csv");
  const std::string csv = (dir / "e.csv").string(), js = (dir / "e.json").string();
  write_entropy_csv(csv, rep);
  write_entropy_json(js, rep, {{"eps", 0.1}});
  for (const EntropyReport& back : {read_entropy_csv(csv), read_entropy_json(js)}) {
    REQUIRE(back.rows.size() == rep.rows.size());
    for (size_t i = 0; i < rep.rows.size(); ++i) {
      CHECK(back.rows[i].t == rep.rows[i].t);
      CHECK(back.rows[i].E.total == rep.rows[i].E.total);
      CHECK(back.rows[i].E.pressure == rep.rows[i].E.pressure);
      CHECK(back.rows[i].R == rep.rows[i].R);
      CHECK(back.rows[i].envelope == rep.rows[i].envelope);
      CHECK(back.rows[i].dg_min_flux == rep.rows[i].dg_min_flux);
    }
  }
  write_entropy_csv(csv, EntropyReport{});
  std::ifstream f(csv);
  std::string line;
  int lines = 0;
  while (std::getline(f, line)) ++lines;
  CHECK(lines == 1);
  CHECK(read_entropy_csv(csv).rows.empty());
}

TEST_CASE("checkpoint round trip") {
  const LayerGrid g = LayerGrid::unit_square(5, 4, 3, 0.3);
  FluidState3 s = FluidState3::zeros(g);
  for (int c = 0; c < g.num_cells(); ++c) {
    s.rho(c) = 1.0 + c / 7.0;
    s.u.row(c) << std::sin(c), 1.0 / (c + 3.0), -c * 1e-12;
  }
  const fs::path dir = scratch("ckpt");
  const std::string p3 = (dir / "s3.csv").string(), p2 = (dir / "s2.csv").string();
  write_checkpoint(p3, s, g, FroudeRegime::SqrtEps, 0.125);
  CheckpointHeader h;
  const FluidState3 b = read_checkpoint3(p3, &h);
  CHECK((b.rho - s.rho).abs().maxCoeff() == 0.0);
  CHECK((b.u - s.u).abs().maxCoeff() == 0.0);
  CHECK(h.nx == 5);
  CHECK(h.nz == 3);
  CHECK(h.eps == 0.3);
  CHECK(h.time == 0.125);
  CHECK(h.regime == FroudeRegime::SqrtEps);
  CHECK_FALSE(h.planar);

  const FluidState2 s2 = column_average_state(s, g);
  write_checkpoint(p2, s2, g.planar(), FroudeRegime::One, 0.0);
  const FluidState2 b2 = read_checkpoint2(p2, &h);
  CHECK((b2.r - s2.r).abs().maxCoeff() == 0.0);
  CHECK((b2.w - s2.w).abs().maxCoeff() == 0.0);
  CHECK(h.planar);
  CHECK_THROWS(read_checkpoint3(p2));
}

TEST_CASE("manufactured solutions") {
  CHECK(fitted_order({0.1, 0.05, 0.025}, {1e-2, 2.5e-3, 6.25e-4}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fitted_order({0.1, 0.05}, {3.0, 1.5}) == doctest::Approx(1.0).epsilon(1e-12));
  for (ManufacturedSolver s : {ManufacturedSolver::Hydro2D, ManufacturedSolver::Transport2D}) {
    const ManufacturedResult c = manufactured_convergence(s, {8, 16}, true);
    for (double e : c.error) CHECK(e <= 1e-12);
  }
  const ManufacturedResult h = manufactured_convergence(ManufacturedSolver::Hydro2D, {8, 16});
  CHECK(h.error[1] < h.error[0]);
}

TEST_CASE("scenario and sweep outputs") {
  ScenarioConfig c = tiny();
  c.recipe = Recipe::Uniform;
  c.alpha = 0.0;
  c.source_mass = 0.0;
  const ScenarioResult u = run_scenario(c, 0.3);
  REQUIRE(u.completed);
  CHECK(u.max_entropy <= 1e-10);
  CHECK(u.mass_drift3 <= 1e-13);
  CHECK(u.steps_done == u.steps);
  CHECK(u.dt * u.steps == doctest::Approx(c.t_end).epsilon(1e-14));

  c = tiny();
  const fs::path dir = scratch("sweep");
  c.out_dir = dir.string();
  const SweepResult s = run_epsilon_sweep(c);
  REQUIRE(s.entries.size() == 2);
  CHECK(s.all_completed);
  for (const ScenarioResult& r : s.entries) {
    CHECK(r.report.rows.size() >= 2);
    CHECK(r.report.rows.front().t == 0.0);
    CHECK(r.report.rows.back().t == doctest::Approx(c.t_end).epsilon(1e-12));
    CHECK(r.dg_min >= -1e-10);
    const auto files = write_scenario_outputs(r, c, dir.string());
    CHECK(files.size() == 3);
    for (const auto& f : files) CHECK(fs::exists(f));
  }
  const nlohmann::json sj = summary_json(s, c);
  CHECK(sj["runs"].size() == 2);
  CHECK(sj.contains("checks"));
  CHECK(sj["config"] == to_json(c));
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  CHECK(n == 6);
}
