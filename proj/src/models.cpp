#include "lcshare/models.hpp"

#include <cmath>
#include <string>

namespace lcshare {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void DesiredSpeedCurve::validate() const {
  if (!(v_max > 0.0)) throw ValidationError("desired-speed curve: v_max must be positive");
  if (!(s_st >= 0.0)) throw ValidationError("desired-speed curve: s_st must be nonnegative");
  if (!(s_go > s_st)) throw ValidationError("desired-speed curve: s_go must exceed s_st");
}

double desired_speed(const DesiredSpeedCurve& c, double gap) {
  if (gap <= c.s_st) return 0.0;
  if (gap >= c.s_go) return c.v_max;
  return 0.5 * c.v_max * (1.0 - std::cos(kPi * (gap - c.s_st) / (c.s_go - c.s_st)));
}

double desired_speed_slope(const DesiredSpeedCurve& c, double gap) {
  if (gap <= c.s_st || gap >= c.s_go) return 0.0;
  double w = c.s_go - c.s_st;
  return 0.5 * c.v_max * kPi / w * std::sin(kPi * (gap - c.s_st) / w);
}

double DriverModel::a(int mode) const {
  if (mode == 1) return a1;
  if (mode == 2) return a2;
  throw ValidationError("driver mode must be 1 or 2, got " + std::to_string(mode));
}

double DriverModel::b(int mode) const {
  if (mode == 1) return b1;
  if (mode == 2) return b2;
  throw ValidationError("driver mode must be 1 or 2, got " + std::to_string(mode));
}

void DriverModel::validate() const {
  if (!(a1 > 0.0 && b1 >= 0.0 && a2 > 0.0 && b2 >= 0.0))
    throw ValidationError("driver model: gains a_i must be positive, b_i nonnegative");
  curve.validate();
}

void FollowerModel::validate() const {
  if (!(a > 0.0 && b >= 0.0))
    throw ValidationError("follower model: a must be positive, b nonnegative");
  curve.validate();
}

void TdParams::validate() const {
  if (!(T_des > 0.0)) throw ValidationError("TD params: T_des must be positive");
  if (!(delta >= 0.0 && delta < 1.0)) throw ValidationError("TD params: delta must be in [0,1)");
  if (!(zeta > 0.0)) throw ValidationError("TD params: zeta must be positive");
  if (!(threshold > 0.0)) throw ValidationError("TD params: threshold must be positive");
}

double human_accel(const DriverModel& m, int mode, double v_E, double s_EL, double v_L) {
  return m.a(mode) * (desired_speed(m.curve, s_EL) - v_E) + m.b(mode) * (v_L - v_E);
}

double follower_accel(const FollowerModel& m, double v_F, double s_FE, double s_EL, double v_E,
                      double v_L) {
  if (s_FE <= 0.0) {
    double s_FL = s_FE + s_EL;
    return m.a * (desired_speed(m.curve, s_FL) - v_F) + m.b * (v_L - v_F);
  }
  return m.a * (desired_speed(m.curve, s_FE) - v_F) + m.b * (v_E - v_F);
}

double task_difficulty(const TdParams& p, double v_E, double s_EL) {
  if (s_EL <= 0.0) throw RuntimeAbort("task_difficulty: nonpositive lead gap (collision)");
  if (v_E <= 0.0) return 0.0;
  return std::pow(v_E * p.T_des / ((1.0 - p.delta) * s_EL), p.zeta);
}

int mode_from_td(double td, double threshold) { return td >= threshold ? 2 : 1; }

}  // namespace lcshare
