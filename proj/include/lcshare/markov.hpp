#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "lcshare/models.hpp"

namespace lcshare {

struct ModeRates {
  double lambda12;  // relaxed -> urgent
  double lambda21;  // urgent -> relaxed
  void validate() const;
};

struct ObsParams {
  double alpha;  // misclassification probability at hidden jumps
  double q;      // spontaneous observation flip rate
  void validate() const;
};

// Joint process z = (eta, etahat) over {1,2}x{1,2}, indexed 0..3.
inline int joint_index(int eta, int etahat) { return 2 * (eta - 1) + (etahat - 1); }
inline int eta_of(int z) { return z / 2 + 1; }
inline int etahat_of(int z) { return z % 2 + 1; }

struct JointGenerator {
  Eigen::Matrix4d nu;  // nu(z, w): jump rate z -> w, diagonal = -row sum
  // Reachable targets from z (positive off-diagonal rates), ascending index.
  std::vector<int> targets(int z) const;
  double exit_rate(int z) const { return -nu(z, z); }
};

JointGenerator build_joint_generator(const ModeRates& rates, const ObsParams& obs);

// Piecewise-constant cadlag path of the joint state.
struct ModePath {
  std::vector<double> times;   // jump instants, times[0] == 0
  std::vector<int> states;     // joint index active from times[i]
  double horizon = 0.0;
  int state_at(double t) const;
  // Time fraction spent with the hidden mode equal to `mode` over [0, horizon].
  double hidden_fraction(int mode) const;
};

// Exact (Gillespie) sampling of the joint continuous-time chain.
ModePath sample_path(const JointGenerator& gen, int z0, double horizon, std::uint64_t seed);

struct RateEstimate {
  double lambda12 = 0.0, lambda21 = 0.0;
  double T1 = 0.0, T2 = 0.0;  // occupancy times
  int n12 = 0, n21 = 0;       // transition counts
};

// MLE of hidden-mode switch rates from dwell segments (duration, mode).
RateEstimate mle_rates(const std::vector<std::pair<double, int>>& segments);
// Same from per-sample labels at a fixed sampling period.
RateEstimate mle_rates(const std::vector<int>& labels, double dt);

// TD-thresholded hidden-mode labels for sampled kinematics.
std::vector<int> td_mode_labeling(const TdParams& td, const std::vector<double>& v_E,
                                  const std::vector<double>& s_EL);

// Conditional observation path given a sampled hidden label sequence:
// redraw with misclassification alpha at hidden jumps, flip at rate q between.
std::vector<int> sample_observation_labels(const std::vector<int>& hidden, double dt,
                                           const ObsParams& obs, std::uint64_t seed);

}  // namespace lcshare
