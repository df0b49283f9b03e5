#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lcshare/markov.hpp"
#include "lcshare/models.hpp"
#include "lcshare/sim.hpp"

namespace lcshare {

// One vehicle's rows from the canonical trajectory CSV
// (header t,vehicle_id,lane_id,x,v[,a]), grouped and time-sorted.
struct VehicleTrack {
  long id = 0;
  std::vector<double> t;
  std::vector<double> x;     // longitudinal position, m
  std::vector<double> v;     // speed, m/s
  std::vector<double> a;     // acceleration, m/s^2; empty when the column is absent
  std::vector<int> lane;
  double dt() const;
  // Strictly increasing t, uniform sampling within 1e-6 s, >= 2 samples, and
  // the unit check: median |v - dx/dt| over consecutive pairs <= 0.5 m/s.
  void validate() const;
};

// Parses the canonical CSV. Rows may arrive in any order; the result is
// grouped by vehicle, sorted by time within each vehicle and by id across
// vehicles. Malformed rows raise ValidationError with the 1-based line number.
std::vector<VehicleTrack> ingest(const std::string& csv_text);
std::vector<VehicleTrack> ingest_file(const std::string& path);

// One observed lane change: the ego's kinematics and its target-lane
// leader/follower over a window around the lane-id crossing, with
// bumper-to-bumper gaps (position difference minus the vehicle length).
struct LaneChangeEvent {
  long ego_id = 0, leader_id = 0, follower_id = 0;
  int target_lane = 0;
  double t0 = 0.0, t1 = 0.0;  // window, covers the crossing
  double t_cross = 0.0;
  std::vector<double> t;
  std::vector<double> v_E, s_EL, v_L, v_F, s_FE;
  std::vector<double> a_E;  // data column when present, finite difference otherwise
  double front_gap_at_cross = 0.0;  // s_EL at t_cross
  double rear_gap_at_cross = 0.0;   // s_FE at t_cross
};

struct EventOptions {
  double window = 5.0;          // s either side of the crossing
  double vehicle_length = 4.5;  // m, bumper-to-bumper gap correction
};

// Events where the ego's lane id changes; the target-lane neighbors are the
// vehicles nearest ahead/behind at the crossing instant (ties on distance
// resolved toward the larger id). Events without both neighbors, with a
// truncated window, or with a nonpositive ego-leader gap are skipped; the
// reasons are appended to `skipped` when given.
std::vector<LaneChangeEvent> extract_events(const std::vector<VehicleTrack>& tracks,
                                            const EventOptions& opts = {},
                                            std::vector<std::string>* skipped = nullptr);

struct FitOptions {
  int restarts = 10;
  int max_iters = 600;   // per restart
  double tol = 1e-10;    // simplex objective-spread stop
  std::uint64_t seed = 1;
  int jobs = 1;          // restarts run in parallel
};

struct FitDiag {
  double residual = 0.0;   // summed squared speed deviation at the optimum
  bool converged = false;  // best restart hit the tolerance before max_iters
};

// Global least squares: forward-simulates the candidate model over every
// event window from the data initial conditions and minimizes the summed
// squared speed deviation with a derivative-free simplex search (restarted,
// jittered, bound-projected). labels[e][i] is the hidden mode driving sample
// i of event e (driver fit only). Out-of-bounds guesses are projected into
// the bounds before the search starts.
std::pair<DriverModel, FitDiag> fit_driver(const std::vector<LaneChangeEvent>& events,
                                           const std::vector<std::vector<int>>& labels,
                                           const DriverModel& guess, const DriverModel& lo,
                                           const DriverModel& hi, const FitOptions& opts = {});

std::pair<FollowerModel, FitDiag> fit_follower(const std::vector<LaneChangeEvent>& events,
                                               const FollowerModel& guess,
                                               const FollowerModel& lo, const FollowerModel& hi,
                                               const FitOptions& opts = {});

struct TdGrid {
  std::vector<double> T_des;  // default 0.6..2.0 step 0.1
  std::vector<double> delta;  // default 0.00..0.60 step 0.05
  double zeta = 1.0;
  double threshold = 1.0;
  int min_mode_samples = 8;  // candidates must give each mode this many samples
};

// Grid search for the task-difficulty parameters: each candidate labels the
// samples, and the score is the relative SSE improvement of a two-mode
// linear (a_i, b_i) regression of the observed accelerations over the
// single-mode regression, with the desired-speed curve held fixed.
TdParams fit_td(const std::vector<LaneChangeEvent>& events, const DesiredSpeedCurve& curve,
                const TdGrid& grid = {});

// Pooled transition-rate MLE over the TD-labeled events: dwell occupancies
// and transition counts accumulate per event (no transitions are counted
// across event boundaries).
RateEstimate calibrate_rates(const std::vector<LaneChangeEvent>& events, const TdParams& td);

// Minimum observed rear/front gaps at the crossing instants.
CompletionCriterion extract_thresholds(const std::vector<LaneChangeEvent>& events,
                                       double tau = 1.0);

struct CalibrationResult {
  DriverModel driver;
  FollowerModel follower;
  ModeRates rates{0.0, 0.0};
  TdParams td{1.0, 0.0, 1.0, 1.0};
  CompletionCriterion thresholds{1.0, 1.0, 1.0};
  double driver_residual = 0.0;
  double follower_residual = 0.0;
  bool driver_converged = false;
  bool follower_converged = false;
};

struct CalibOptions {
  FitOptions fit;
  TdGrid td_grid;
  DriverModel driver_guess{0.3, 0.1, 0.3, 0.1, {22.0, 4.0, 20.0}};
  DriverModel driver_lo{0.01, 0.0, 0.01, 0.0, {5.0, 0.5, 3.0}};
  DriverModel driver_hi{2.0, 2.0, 2.0, 2.0, {40.0, 10.0, 40.0}};
  FollowerModel follower_guess{0.3, 0.1, {22.0, 4.0, 20.0}};
  FollowerModel follower_lo{0.01, 0.0, {5.0, 0.5, 3.0}};
  FollowerModel follower_hi{2.0, 2.0, {40.0, 10.0, 40.0}};
};

// Full pipeline: preliminary single-mode driver fit (for the curve), TD grid
// search, TD labeling, two-mode driver fit, follower fit, pooled rate MLE,
// and threshold extraction.
CalibrationResult calibrate(const std::vector<LaneChangeEvent>& events,
                            const CalibOptions& opts = {});

nlohmann::json calibration_to_json(const CalibrationResult& r);

}  // namespace lcshare
