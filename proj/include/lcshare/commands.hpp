#pragma once

#include <iosfwd>
#include <string>

#include "lcshare/scenario.hpp"

namespace lcshare {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;    // bad input: files, parameters, flags
inline constexpr int kExitInfeasible = 2;    // synthesis infeasible / certificate failed
inline constexpr int kExitRuntimeAbort = 3;  // run aborted (collision, numerics)

struct CommandOptions {
  std::string out_dir = "out";
  int jobs = 1;
  std::ostream* log = nullptr;  // progress + summary lines; null silences
};

// Each command validates the scenario, writes its primary outputs under
// opt.out_dir, logs one summary line per result, and returns an exit code.
// Identical scenario + seeds produce byte-identical output files.

// Controller synthesis for the scenario's primary scheme (nominal program, or
// the MIC program at the scenario beta). Writes gains.json,
// synth_diagnostics.json, certificate.json.
int cmd_synth(const Scenario& sc, const CommandOptions& opt);

// Paired-seed Monte Carlo over the scenario's scheme list. Writes
// mc_<scheme>.csv per scheme and mc_summary.json.
int cmd_montecarlo(const Scenario& sc, const CommandOptions& opt);

// MIC effort sweep over beta_grid with the nominal design as the beta = 0
// baseline row; paired seeds across every row. Writes sweep_beta.csv and
// sweep_beta.json. Per-beta synthesis failures are recorded and skipped.
int cmd_sweep_beta(const Scenario& sc, const CommandOptions& opt);

// Observation-channel sensitivity over alpha_grid x q_grid: per point a fresh
// joint generator, nominal synthesis, and paired-seed Monte Carlo. Writes
// sweep_obs.csv and sweep_obs.json.
int cmd_sweep_obs(const Scenario& sc, const CommandOptions& opt);

// Replays the leader speed of the first lane-change event in event_file
// against every scheme in the scenario list (TD mode source, event initial
// conditions). Writes replay_<scheme>.csv traces and replay_report.json.
int cmd_replay(const Scenario& sc, const CommandOptions& opt);

// Full calibration pipeline on data_file. Writes calibration.json.
int cmd_calibrate(const Scenario& sc, const CommandOptions& opt);

}  // namespace lcshare
