#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcshare/calib.hpp"
#include "lcshare/markov.hpp"
#include "lcshare/models.hpp"
#include "lcshare/sim.hpp"

namespace lcshare {

// Single source of truth for one experiment: models, operating point,
// disturbance, completion thresholds, schemes, seeds, and sweep grids, all
// loaded from one JSON file.
struct Scenario {
  std::string name;
  DriverModel driver{};
  FollowerModel follower{};
  ModeRates rates{};
  ObsParams obs{};
  TdParams td{};
  double v_star = 0.0;
  LeaderProfile disturbance;
  CompletionCriterion criterion{};

  double dt = 0.01;
  double horizon = 20.0;
  ModeSource mode_source = ModeSource::markov;
  std::optional<PlantState> x0;  // absent: the coupled equilibrium at v_star

  std::vector<Scheme> schemes{Scheme::nominal_shared};  // run/compare order
  double beta = 1.0;                                    // MIC effort weight

  std::uint64_t seed_master = 1;
  std::vector<std::uint64_t> seeds;  // resolved per-trial seeds

  std::vector<double> beta_grid;
  std::vector<double> alpha_grid;
  std::vector<double> q_grid;
  std::vector<double> epsilon_grid;  // empty: synthesis default grid

  std::string event_file;  // replay input (canonical track CSV)
  std::string data_file;   // calibration input (canonical track CSV)
  EventOptions event_opts;
  std::string base_dir;  // directory of the scenario file; resolves the paths above

  Scheme primary_scheme() const;
  void validate() const;
};

// seeds[i] = derive_seed(master, i), i = 0..count-1.
std::vector<std::uint64_t> derive_seeds(std::uint64_t master, std::size_t count);

// Joins a possibly relative path with the scenario's base directory.
std::string resolve_path(const Scenario& s, const std::string& path);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);

}  // namespace lcshare
