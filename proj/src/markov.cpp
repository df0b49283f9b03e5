#include "lcshare/markov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lcshare/rng.hpp"

namespace lcshare {

void ModeRates::validate() const {
  if (!(lambda12 >= 0.0) || !(lambda21 >= 0.0))
    throw ValidationError("mode rates must be nonnegative");
}

void ObsParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0,1]");
  if (!(q >= 0.0)) throw ValidationError("q must be nonnegative");
}

std::vector<int> JointGenerator::targets(int z) const {
  std::vector<int> out;
  for (int w = 0; w < 4; ++w)
    if (w != z && nu(z, w) > 0.0) out.push_back(w);
  return out;
}

JointGenerator build_joint_generator(const ModeRates& rates, const ObsParams& obs) {
  rates.validate();
  obs.validate();
  auto lambda = [&](int i, int j) {
    return (i == 1 && j == 2) ? rates.lambda12 : rates.lambda21;
  };
  JointGenerator gen;
  gen.nu.setZero();
  for (int i = 1; i <= 2; ++i) {
    for (int k = 1; k <= 2; ++k) {
      int z = joint_index(i, k);
      int j = (i == 1) ? 2 : 1;
      double lam = lambda(i, j);
      // Hidden jump with simultaneous observation redraw. Writing the matched
      // rate as lam - alpha*lam keeps the marginal over l exactly lam.
      double mis = obs.alpha * lam;
      gen.nu(z, joint_index(j, j)) += lam - mis;
      gen.nu(z, joint_index(j, (j == 1) ? 2 : 1)) += mis;
      // Spontaneous observation flip.
      gen.nu(z, joint_index(i, (k == 1) ? 2 : 1)) += obs.q;
    }
  }
  for (int z = 0; z < 4; ++z) {
    double row = 0.0;
    for (int w = 0; w < 4; ++w)
      if (w != z) row += gen.nu(z, w);
    gen.nu(z, z) = -row;
  }
  return gen;
}

int ModePath::state_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return states.front();
  return states[static_cast<std::size_t>(std::distance(times.begin(), it)) - 1];
}

double ModePath::hidden_fraction(int mode) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    double t_end = (i + 1 < times.size()) ? std::min(times[i + 1], horizon) : horizon;
    if (t_end > times[i] && eta_of(states[i]) == mode) acc += t_end - times[i];
  }
  return acc / horizon;
}

ModePath sample_path(const JointGenerator& gen, int z0, double horizon, std::uint64_t seed) {
  if (z0 < 0 || z0 > 3) throw ValidationError("sample_path: joint state index out of range");
  if (!(horizon > 0.0)) throw ValidationError("sample_path: horizon must be positive");
  ModePath path;
  path.horizon = horizon;
  path.times.push_back(0.0);
  path.states.push_back(z0);
  Rng rng(seed);
  double t = 0.0;
  int z = z0;
  for (;;) {
    double rate = gen.exit_rate(z);
    if (rate <= 0.0) break;  // absorbing state
    t += rng.exponential(rate);
    if (t >= horizon) break;
    std::vector<double> w(4, 0.0);
    for (int u = 0; u < 4; ++u)
      if (u != z) w[static_cast<std::size_t>(u)] = gen.nu(z, u);
    z = static_cast<int>(rng.categorical(w));
    path.times.push_back(t);
    path.states.push_back(z);
  }
  return path;
}

RateEstimate mle_rates(const std::vector<std::pair<double, int>>& segments) {
  if (segments.empty()) throw ValidationError("mle_rates: empty segment list");
  RateEstimate est;
  int prev = 0;
  for (const auto& [dur, mode] : segments) {
    if (mode != 1 && mode != 2)
      throw ValidationError("mle_rates: mode labels must be 1 or 2");
    if (!(dur > 0.0)) throw ValidationError("mle_rates: segment durations must be positive");
    if (mode == 1)
      est.T1 += dur;
    else
      est.T2 += dur;
    if (prev == 1 && mode == 2) ++est.n12;
    if (prev == 2 && mode == 1) ++est.n21;
    prev = mode;
  }
  if (est.T1 <= 0.0) throw ValidationError("mle_rates: mode 1 never observed");
  if (est.T2 <= 0.0) throw ValidationError("mle_rates: mode 2 never observed");
  est.lambda12 = est.n12 / est.T1;
  est.lambda21 = est.n21 / est.T2;
  return est;
}

RateEstimate mle_rates(const std::vector<int>& labels, double dt) {
  if (labels.empty()) throw ValidationError("mle_rates: empty label sequence");
  if (!(dt > 0.0)) throw ValidationError("mle_rates: dt must be positive");
  std::vector<std::pair<double, int>> segments;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i < labels.size() && labels[i] == labels[i - 1]) {
      ++run;
      continue;
    }
    segments.emplace_back(static_cast<double>(run) * dt, labels[i - 1]);
    run = 1;
  }
  return mle_rates(segments);
}

std::vector<int> td_mode_labeling(const TdParams& td, const std::vector<double>& v_E,
                                  const std::vector<double>& s_EL) {
  if (v_E.empty()) throw ValidationError("td_mode_labeling: empty series");
  if (v_E.size() != s_EL.size())
    throw ValidationError("td_mode_labeling: series length mismatch");
  std::vector<int> labels(v_E.size());
  for (std::size_t i = 0; i < v_E.size(); ++i)
    labels[i] = mode_from_td(task_difficulty(td, v_E[i], s_EL[i]), td.threshold);
  return labels;
}

std::vector<int> sample_observation_labels(const std::vector<int>& hidden, double dt,
                                           const ObsParams& obs, std::uint64_t seed) {
  obs.validate();
  if (hidden.empty()) throw ValidationError("sample_observation_labels: empty hidden sequence");
  if (!(dt > 0.0)) throw ValidationError("sample_observation_labels: dt must be positive");
  Rng rng(seed);
  std::vector<int> hat(hidden.size());
  hat[0] = hidden[0];  // observer starts in agreement
  double p_flip = -std::expm1(-obs.q * dt);
  for (std::size_t i = 1; i < hidden.size(); ++i) {
    if (hidden[i] != hidden[i - 1]) {
      bool mis = rng.bernoulli(obs.alpha);
      hat[i] = mis ? (hidden[i] == 1 ? 2 : 1) : hidden[i];
    } else if (obs.q > 0.0 && rng.bernoulli(p_flip)) {
      hat[i] = (hat[i - 1] == 1) ? 2 : 1;
    } else {
      hat[i] = hat[i - 1];
    }
  }
  return hat;
}

}  // namespace lcshare
