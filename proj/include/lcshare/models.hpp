#pragma once

#include "lcshare/errors.hpp"

namespace lcshare {

// Cosine desired-speed ramp: 0 below s_st, v_max above s_go, smooth in between.
struct DesiredSpeedCurve {
  double v_max;
  double s_st;
  double s_go;
  void validate() const;
};

double desired_speed(const DesiredSpeedCurve& curve, double gap);
double desired_speed_slope(const DesiredSpeedCurve& curve, double gap);

// Human ego driver: mode-dependent OVM toward the lead vehicle.
struct DriverModel {
  double a1, b1;  // mode 1 (relaxed)
  double a2, b2;  // mode 2 (urgent)
  DesiredSpeedCurve curve;
  double a(int mode) const;
  double b(int mode) const;
  void validate() const;
};

// Target-lane follower: OVM with a two-branch leader selection.
struct FollowerModel {
  double a, b;
  DesiredSpeedCurve curve;
  void validate() const;
};

struct TdParams {
  double T_des;
  double delta;
  double zeta;
  double threshold = 1.0;
  void validate() const;
};

// u_H = a_i (V(s_EL) - v_E) + b_i (v_L - v_E), mode in {1, 2}.
double human_accel(const DriverModel& m, int mode, double v_E, double s_EL, double v_L);

// Before the merge (s_FE <= 0) the follower still tracks the original leader
// through the combined gap s_FL = s_FE + s_EL; afterwards it tracks the ego.
double follower_accel(const FollowerModel& m, double v_F, double s_FE, double s_EL, double v_E,
                      double v_L);

// TD = (v_E T_des / ((1 - delta) s_EL))^zeta, zero when the ego is stopped.
// s_EL <= 0 is a collision and raises RuntimeAbort.
double task_difficulty(const TdParams& p, double v_E, double s_EL);

// Mode 2 (urgent) if and only if td >= threshold.
int mode_from_td(double td, double threshold);

}  // namespace lcshare
