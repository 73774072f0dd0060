#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "thinlayer/entropy.hpp"
#include "thinlayer/grid.hpp"
#include "thinlayer/hydro.hpp"
#include "thinlayer/params.hpp"

namespace thinlayer {

// "thinlayer <version> (<git describe>)"
std::string version_string();

// %.17g, which round-trips every double exactly.
std::string format_double(double x);

// Entropy CSV: header line with kEntropyCsvColumns, then one row per snapshot.
void write_entropy_csv(const std::string& path, const EntropyReport& report);
EntropyReport read_entropy_csv(const std::string& path);

// JSON mirror of the CSV rows under "rows" plus a "metadata" object.
nlohmann::json entropy_json(const EntropyReport& report, const nlohmann::json& metadata);
void write_entropy_json(const std::string& path, const EntropyReport& report, const nlohmann::json& metadata);
EntropyReport read_entropy_json(const std::string& path);

void write_ledger_csv(const std::string& path, const std::vector<EnergyLedger>& ledger);

struct CheckpointHeader {
  int nx = 0, ny = 0, nz = 0;
  double eps = 1.0;
  FroudeRegime regime = FroudeRegime::One;
  double time = 0.0;
  bool planar = false;
};

// First line "# " + JSON header, second line the column names, then one row per cell:
//   3D: i,j,k,rho,u1,u2,u3     planar: i,j,r,w1,w2
void write_checkpoint(const std::string& path, const FluidState3& s, const LayerGrid& grid, FroudeRegime regime,
                      double time);
void write_checkpoint(const std::string& path, const FluidState2& s, const LayerGrid& grid, FroudeRegime regime,
                      double time);
CheckpointHeader read_checkpoint_header(const std::string& path);
FluidState3 read_checkpoint3(const std::string& path, CheckpointHeader* header = nullptr);
FluidState2 read_checkpoint2(const std::string& path, CheckpointHeader* header = nullptr);

void write_json(const std::string& path, const nlohmann::json& j);

}  // namespace thinlayer
