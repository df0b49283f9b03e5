#include "lcshare/mjls.hpp"

#include <cmath>

namespace lcshare {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double invert_desired_speed(const DesiredSpeedCurve& curve, double v) {
  curve.validate();
  if (!(v > 0.0 && v < curve.v_max))
    throw ValidationError("invert_desired_speed: speed must lie strictly inside (0, v_max)");
  return curve.s_st + (curve.s_go - curve.s_st) / kPi * std::acos(1.0 - 2.0 * v / curve.v_max);
}

double invert_desired_speed_bisect(const DesiredSpeedCurve& curve, double v) {
  curve.validate();
  if (!(v > 0.0 && v < curve.v_max))
    throw ValidationError("invert_desired_speed: speed must lie strictly inside (0, v_max)");
  double lo = curve.s_st, hi = curve.s_go;
  while (hi - lo > 1e-12) {
    double mid = 0.5 * (lo + hi);
    if (desired_speed(curve, mid) < v)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

Equilibrium find_equilibrium(const DriverModel& driver, const FollowerModel& follower,
                             double v_star) {
  driver.validate();
  follower.validate();
  Equilibrium eq;
  eq.v_star = v_star;
  eq.s_EL_star = invert_desired_speed(driver.curve, v_star);
  eq.s_FE_star = invert_desired_speed(follower.curve, v_star);
  return eq;
}

LinearMjls linearize(const DriverModel& driver, const FollowerModel& follower,
                     const Equilibrium& eq) {
  LinearMjls sys;
  sys.eq = eq;
  double slope_F = desired_speed_slope(follower.curve, eq.s_FE_star);
  sys.A.setZero();
  sys.A(1, 0) = -1.0;
  sys.A(2, 0) = follower.b;
  sys.A(2, 2) = -(follower.a + follower.b);
  sys.A(2, 3) = follower.a * slope_F;
  sys.A(3, 0) = 1.0;
  sys.A(3, 2) = -1.0;
  sys.B << 1.0, 0.0, 0.0, 0.0;
  sys.C << 0.0, 0.0, 1.0, 0.0;
  sys.D << 0.0, 1.0, 0.0, 0.0;
  double slope_E = desired_speed_slope(driver.curve, eq.s_EL_star);
  for (int i = 1; i <= 2; ++i) {
    double a = driver.a(i), b = driver.b(i);
    sys.K_H[i - 1] << -(a + b), a * slope_E, 0.0, 0.0;
    sys.D_H[i - 1] = b;
  }
  return sys;
}

ClosedLoop closed_loop(const LinearMjls& sys, int i, int k,
                       const std::array<Eigen::RowVector4d, 2>& K_AV,
                       const std::array<double, 2>& D_AV) {
  if (i < 1 || i > 2 || k < 1 || k > 2)
    throw ValidationError("closed_loop: mode indices must be 1 or 2");
  ClosedLoop cl;
  cl.A = sys.A + sys.B * (sys.K_H[i - 1] + K_AV[k - 1]);
  cl.D = sys.D + sys.B * (sys.D_H[i - 1] + D_AV[k - 1]);
  return cl;
}

namespace {

// Smallest singular value of [A - lambda I, Z] over the closed right half plane
// eigenvalues of A.
bool pbh_check(const Eigen::Matrix4d& A, const Eigen::MatrixXcd& Z, double tol) {
  Eigen::EigenSolver<Eigen::Matrix4d> es(A);
  for (int m = 0; m < 4; ++m) {
    std::complex<double> lam = es.eigenvalues()(m);
    if (lam.real() < -1e-9) continue;  // stable modes need no authority
    Eigen::MatrixXcd M(4, 4 + Z.cols());
    M.leftCols<4>() = A.cast<std::complex<double>>() -
                      lam * Eigen::Matrix4cd::Identity();
    M.rightCols(Z.cols()) = Z;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    if (svd.singularValues().minCoeff() <= tol) return false;
  }
  return true;
}

}  // namespace

bool pbh_stabilizable(const Eigen::Matrix4d& A, const Eigen::Vector4d& B, double tol) {
  return pbh_check(A, B.cast<std::complex<double>>(), tol);
}

bool pbh_detectable(const Eigen::Matrix4d& A, const Eigen::RowVector4d& C, double tol) {
  return pbh_check(A.transpose(), C.transpose().cast<std::complex<double>>(), tol);
}

}  // namespace lcshare
