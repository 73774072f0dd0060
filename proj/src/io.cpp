#include "thinlayer/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef THINLAYER_VERSION
#define THINLAYER_VERSION "0.1.0"
#endif
#ifndef THINLAYER_GIT_DESCRIBE
#define THINLAYER_GIT_DESCRIBE "unknown"
#endif

namespace thinlayer {

std::string version_string() {
  return std::string("thinlayer ") + THINLAYER_VERSION + " (" + THINLAYER_GIT_DESCRIBE + ")";
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

std::vector<double> row_values(const EntropyRow& r) {
  std::vector<double> v{r.t, r.E.total, r.E.kinetic, r.E.pressure, r.E.radiative};
  for (double x : r.R) v.push_back(x);
  v.push_back(r.envelope);
  v.push_back(r.lb_margin);
  v.push_back(r.dg_min_flux);
  v.push_back(r.energy_violation);
  return v;
}

EntropyRow row_from_values(const std::vector<double>& v) {
  if (v.size() != kEntropyCsvColumns.size()) throw std::runtime_error("entropy row: wrong column count");
  EntropyRow r;
  r.t = v[0];
  r.E.total = v[1];
  r.E.kinetic = v[2];
  r.E.pressure = v[3];
  r.E.radiative = v[4];
  for (int i = 0; i < 8; ++i) r.R[i] = v[5 + i];
  r.envelope = v[13];
  r.lb_margin = v[14];
  r.dg_min_flux = v[15];
  r.energy_violation = v[16];
  return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

}  // namespace

void write_entropy_csv(const std::string& path, const EntropyReport& report) {
  auto f = open_out(path);
  for (size_t i = 0; i < kEntropyCsvColumns.size(); ++i) f << (i ? "," : "") << kEntropyCsvColumns[i];
  f << '\n';
  for (const auto& r : report.rows) {
    const auto v = row_values(r);
    for (size_t i = 0; i < v.size(); ++i) f << (i ? "," : "") << format_double(v[i]);
    f << '\n';
  }
}

EntropyReport read_entropy_csv(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
  if (split(line, ',') != kEntropyCsvColumns) throw std::runtime_error(path + ": unexpected header");
  EntropyReport rep;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    for (const auto& tok : split(line, ',')) v.push_back(std::stod(tok));
    rep.rows.push_back(row_from_values(v));
  }
  return rep;
}

nlohmann::json entropy_json(const EntropyReport& report, const nlohmann::json& metadata) {
  nlohmann::json j;
  j["metadata"] = metadata;
  j["columns"] = kEntropyCsvColumns;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) rows.push_back(row_values(r));
  j["rows"] = rows;
  return j;
}

void write_entropy_json(const std::string& path, const EntropyReport& report, const nlohmann::json& metadata) {
  write_json(path, entropy_json(report, metadata));
}

EntropyReport read_entropy_json(const std::string& path) {
  auto f = open_in(path);
  const nlohmann::json j = nlohmann::json::parse(f);
  if (j.at("columns").get<std::vector<std::string>>() != kEntropyCsvColumns)
    throw std::runtime_error(path + ": unexpected columns");
  EntropyReport rep;
  for (const auto& row : j.at("rows")) rep.rows.push_back(row_from_values(row.get<std::vector<double>>()));
  return rep;
}

void write_ledger_csv(const std::string& path, const std::vector<EnergyLedger>& ledger) {
  auto f = open_out(path);
  f << "t,dt,kinetic,potential,radiative,dissipation,work_gravity,work_centrifugal,work_coriolis,work_radiation,"
       "radiation_source,radiation_outflow,clip_mass,halvings\n";
  for (const auto& l : ledger) {
    for (double x : {l.t, l.dt, l.kinetic, l.potential, l.radiative, l.dissipation, l.work_gravity,
                     l.work_centrifugal, l.work_coriolis, l.work_radiation, l.radiation_source, l.radiation_outflow,
                     l.clip_mass})
      f << format_double(x) << ',';
    f << l.halvings << '\n';
  }
}

namespace {

nlohmann::json header_json(const LayerGrid& g, FroudeRegime regime, double time, bool planar) {
  return {{"nx", g.nx}, {"ny", g.ny}, {"nz", planar ? 1 : g.nz}, {"eps", g.eps},
          {"regime", to_string(regime)}, {"time", time}, {"planar", planar}};
}

}  // namespace

void write_checkpoint(const std::string& path, const FluidState3& s, const LayerGrid& grid, FroudeRegime regime,
                      double time) {
  auto f = open_out(path);
  f << "# " << header_json(grid, regime, time, false).dump() << '\n';
  f << "i,j,k,rho,u1,u2,u3\n";
  for (int k = 0; k < grid.nz; ++k)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        const int c = grid.index(i, j, k);
        f << i << ',' << j << ',' << k << ',' << format_double(s.rho(c)) << ',' << format_double(s.u(c, 0)) << ','
          << format_double(s.u(c, 1)) << ',' << format_double(s.u(c, 2)) << '\n';
      }
}

void write_checkpoint(const std::string& path, const FluidState2& s, const LayerGrid& grid, FroudeRegime regime,
                      double time) {
  auto f = open_out(path);
  f << "# " << header_json(grid, regime, time, true).dump() << '\n';
  f << "i,j,r,w1,w2\n";
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const int c = grid.column(i, j);
      f << i << ',' << j << ',' << format_double(s.r(c)) << ',' << format_double(s.w(c, 0)) << ','
        << format_double(s.w(c, 1)) << '\n';
    }
}

namespace {

CheckpointHeader parse_header(std::istream& f, const std::string& path) {
  std::string line;
  if (!std::getline(f, line) || line.rfind("# ", 0) != 0) throw std::runtime_error(path + ": missing header");
  const auto j = nlohmann::json::parse(line.substr(2));
  CheckpointHeader h;
  h.nx = j.at("nx");
  h.ny = j.at("ny");
  h.nz = j.at("nz");
  h.eps = j.at("eps");
  h.regime = regime_from_string(j.at("regime"));
  h.time = j.at("time");
  h.planar = j.at("planar");
  std::getline(f, line);  // column names
  return h;
}

}  // namespace

CheckpointHeader read_checkpoint_header(const std::string& path) {
  auto f = open_in(path);
  return parse_header(f, path);
}

FluidState3 read_checkpoint3(const std::string& path, CheckpointHeader* header) {
  auto f = open_in(path);
  const CheckpointHeader h = parse_header(f, path);
  if (h.planar) throw std::runtime_error(path + ": planar checkpoint");
  const int nc = h.nx * h.ny, n = nc * h.nz;
  FluidState3 s{Eigen::ArrayXd::Zero(n), Eigen::ArrayX3d::Zero(n, 3)};
  std::string line;
  int rows = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto t = split(line, ',');
    if (t.size() != 7) throw std::runtime_error(path + ": malformed row");
    const int c = (std::stoi(t[2]) * h.ny + std::stoi(t[1])) * h.nx + std::stoi(t[0]);
    s.rho(c) = std::stod(t[3]);
    for (int d = 0; d < 3; ++d) s.u(c, d) = std::stod(t[4 + d]);
    ++rows;
  }
  if (rows != n) throw std::runtime_error(path + ": row count mismatch");
  if (header) *header = h;
  return s;
}

FluidState2 read_checkpoint2(const std::string& path, CheckpointHeader* header) {
  auto f = open_in(path);
  const CheckpointHeader h = parse_header(f, path);
  if (!h.planar) throw std::runtime_error(path + ": not a planar checkpoint");
  const int n = h.nx * h.ny;
  FluidState2 s{Eigen::ArrayXd::Zero(n), Eigen::ArrayX2d::Zero(n, 2)};
  std::string line;
  int rows = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto t = split(line, ',');
    if (t.size() != 5) throw std::runtime_error(path + ": malformed row");
    const int c = std::stoi(t[1]) * h.nx + std::stoi(t[0]);
    s.r(c) = std::stod(t[2]);
    s.w(c, 0) = std::stod(t[3]);
    s.w(c, 1) = std::stod(t[4]);
    ++rows;
  }
  if (rows != n) throw std::runtime_error(path + ": row count mismatch");
  if (header) *header = h;
  return s;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

}  // namespace thinlayer
