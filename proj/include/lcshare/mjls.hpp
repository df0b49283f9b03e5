#pragma once

#include <Eigen/Dense>
#include <array>

#include "lcshare/models.hpp"

namespace lcshare {

// Equilibrium of the coupled platoon at common speed v_star.
struct Equilibrium {
  double v_star;
  double s_EL_star;
  double s_FE_star;
};

// Closed-form inverse of the cosine ramp on (0, v_max).
double invert_desired_speed(const DesiredSpeedCurve& curve, double v);
// Bisection fallback usable for any monotone curve evaluation, tol 1e-12.
double invert_desired_speed_bisect(const DesiredSpeedCurve& curve, double v);

Equilibrium find_equilibrium(const DriverModel& driver, const FollowerModel& follower,
                             double v_star);

// Mode-switched linearization around the equilibrium.
// State x = [v_E~, s_EL~, v_F~, s_FE~], input u (total ego accel),
// disturbance w = v_L~, output z = v_F~.
struct LinearMjls {
  Eigen::Matrix4d A;
  Eigen::Vector4d B;
  Eigen::RowVector4d C;
  Eigen::Vector4d D;
  std::array<Eigen::RowVector4d, 2> K_H;  // human feedback gains per mode
  std::array<double, 2> D_H;              // human feedthrough per mode
  Equilibrium eq;
};

LinearMjls linearize(const DriverModel& driver, const FollowerModel& follower,
                     const Equilibrium& eq);

struct ClosedLoop {
  Eigen::Matrix4d A;
  Eigen::Vector4d D;
};

// Closed loop for hidden mode i (1-based) and controller gain slot k (1-based).
ClosedLoop closed_loop(const LinearMjls& sys, int i, int k,
                       const std::array<Eigen::RowVector4d, 2>& K_AV,
                       const std::array<double, 2>& D_AV);

// PBH tests with a singular-value threshold.
bool pbh_stabilizable(const Eigen::Matrix4d& A, const Eigen::Vector4d& B, double tol = 1e-8);
bool pbh_detectable(const Eigen::Matrix4d& A, const Eigen::RowVector4d& C, double tol = 1e-8);

}  // namespace lcshare
