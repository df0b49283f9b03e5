#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lcshare/models.hpp"
#include "lcshare/sim.hpp"

namespace lcshare {

// Trapezoidal integral of y over the (possibly non-uniform) grid t.
double trapezoid(const std::vector<double>& t, const std::vector<double>& y);

// Trapezoidal L2 norm sqrt(integral of y^2).
double l2_norm(const std::vector<double>& t, const std::vector<double>& y);

// Per-run scalar performance measures.
struct MetricReport {
  double gamma_est = 0.0;
  double r_int = 0.0;
  double E_AV = 0.0;  // L2 norm of u_AV
  double E_H = 0.0;   // L2 norm of u_H
  double rms_aE = 0.0;
  double rms_aF = 0.0;
  std::optional<double> t_LC;
  double obs_accuracy = 0.0;
  double follow_delay = 0.0;
  bool collision = false;
};

// ||v_F - v_star|| / ||v_L - v_star||; throws ValidationError when the
// denominator vanishes (no disturbance to measure against).
double empirical_gain(const SimResult& result, double v_star);

// E_AV / (E_AV + E_H) with L2-norm energies; throws ValidationError when both
// inputs carry no energy.
double intervention_ratio(const SimResult& result);

// sqrt( (1/T) * integral of a^2 ) for a uniformly sampled series on [0, T].
double rms_accel(const std::vector<double>& a, double T);

// Follower accelerations recomputed from the recorded states (the exact plant
// right-hand side at the sample points).
std::vector<double> follower_accel_series(const SimResult& result, const FollowerModel& follower);

inline constexpr double kFollowDelayCap = 0.5;  // s

// (accuracy, follow delay): time fraction with matching modes, and the mean
// lag until the observed mode catches a hidden jump, each lag capped; jumps
// never caught before the next jump contribute the cap.
std::pair<double, double> observation_quality(const SimResult& result);

// Assemble every per-run measure. r_int is 0 when the run carries no input
// energy at all instead of raising, so equilibrium checks stay usable.
MetricReport metric_report(const SimResult& result, double v_star, const FollowerModel& follower);

struct Stats {
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;
  double variance = 0.0;  // population variance
};

Stats compute_stats(const std::vector<double>& values);

struct AggregateReport {
  std::size_t n_runs = 0;
  std::size_t n_completed = 0;
  double completion_rate = 0.0;
  double collision_rate = 0.0;
  Stats gamma_est, r_int, E_AV, E_H, rms_aE, rms_aF, obs_accuracy, follow_delay;
  Stats t_LC;  // over completing runs only
};

// Mean/max/min/population-variance per metric; throws ValidationError on an
// empty set.
AggregateReport aggregate(const std::vector<MetricReport>& reports);

nlohmann::json report_to_json(const MetricReport& r);
nlohmann::json stats_to_json(const Stats& s);
nlohmann::json aggregate_to_json(const AggregateReport& a);

}  // namespace lcshare
