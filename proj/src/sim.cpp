#include "lcshare/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "lcshare/errors.hpp"
#include "lcshare/matjson.hpp"
#include "lcshare/rng.hpp"

namespace lcshare {

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::human_only: return "human_only";
    case Scheme::nominal_shared: return "nominal_shared";
    case Scheme::mic_shared: return "mic_shared";
    case Scheme::automation_only: return "automation_only";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "human_only") return Scheme::human_only;
  if (name == "nominal_shared") return Scheme::nominal_shared;
  if (name == "mic_shared") return Scheme::mic_shared;
  if (name == "automation_only") return Scheme::automation_only;
  throw ValidationError("unknown scheme: " + name);
}

bool scheme_uses_gains(Scheme s) {
  return s == Scheme::nominal_shared || s == Scheme::mic_shared;
}

void LeaderProfile::validate() const {
  if (kind == Kind::pulse) {
    if (!(a_L > 0.0) || !(t_L > 0.0))
      throw ValidationError("leader pulse needs a_L > 0 and t_L > 0");
  } else if (kind == Kind::replay) {
    if (times.size() < 2 || times.size() != speeds.size())
      throw ValidationError("leader replay needs matching times/speeds with >= 2 samples");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1]))
        throw ValidationError("leader replay timestamps must be strictly increasing");
  }
}

LeaderProfile LeaderProfile::constant() { return LeaderProfile{}; }

LeaderProfile LeaderProfile::pulse(double a_L, double t_L) {
  LeaderProfile p;
  p.kind = Kind::pulse;
  p.a_L = a_L;
  p.t_L = t_L;
  p.validate();
  return p;
}

LeaderProfile LeaderProfile::replay(std::vector<double> times, std::vector<double> speeds) {
  LeaderProfile p;
  p.kind = Kind::replay;
  p.times = std::move(times);
  p.speeds = std::move(speeds);
  p.validate();
  return p;
}

double leader_speed(const LeaderProfile& profile, double t, double v_star) {
  if (!(t >= 0.0)) throw ValidationError("leader_speed: negative time");
  switch (profile.kind) {
    case LeaderProfile::Kind::constant:
      return v_star;
    case LeaderProfile::Kind::pulse:
      if (t <= profile.t_L) return v_star - profile.a_L * t;
      if (t <= 2.0 * profile.t_L) return v_star - profile.a_L * (2.0 * profile.t_L - t);
      return v_star;
    case LeaderProfile::Kind::replay: {
      const auto& ts = profile.times;
      const auto& vs = profile.speeds;
      if (t <= ts.front()) return vs.front();
      if (t >= ts.back()) return vs.back();
      auto it = std::upper_bound(ts.begin(), ts.end(), t);
      std::size_t hi = static_cast<std::size_t>(it - ts.begin());
      std::size_t lo = hi - 1;
      double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
      return vs[lo] + w * (vs[hi] - vs[lo]);
    }
  }
  throw ValidationError("leader_speed: bad profile kind");
}

void CompletionCriterion::validate() const {
  if (!(tau > 0.0) || !(s_rear_thr > 0.0) || !(s_front_thr > 0.0))
    throw ValidationError("completion criterion entries must be positive");
}

bool check_completion(const CompletionCriterion& c, const PlantState& x, double v_L) {
  return x.s_FE > c.s_rear_thr && x.s_EL > c.s_front_thr &&
         x.s_EL - c.tau * (x.v_E - v_L) > 0.0 && x.s_FE - c.tau * (x.v_F - x.v_E) > 0.0;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw ValidationError("sim config: dt must be positive");
  if (!(horizon > dt)) throw ValidationError("sim config: horizon must exceed dt");
  if (!(x0.s_EL > 0.0)) throw ValidationError("sim config: initial ego-leader gap must be positive");
  td.validate();
  obs.validate();
}

// Automation-only baseline gains (gap spring, relative-speed damping).
constexpr double kAutoGapGain = 0.04;
constexpr double kAutoSpeedGain = 0.03;

std::pair<double, double> control_input(Scheme scheme, const LinearMjls& sys,
                                        const ControllerGains* gains, const PlantState& x,
                                        double v_L, int hidden, int observed,
                                        const DriverModel& driver,
                                        [[maybe_unused]] const FollowerModel& follower) {
  double u_H = 0.0, u_AV = 0.0;
  if (scheme != Scheme::automation_only) u_H = human_accel(driver, hidden, x.v_E, x.s_EL, v_L);
  switch (scheme) {
    case Scheme::human_only:
      break;
    case Scheme::nominal_shared:
    case Scheme::mic_shared: {
      if (gains == nullptr) throw ValidationError("control_input: scheme requires controller gains");
      Eigen::Vector4d xt(x.v_E - sys.eq.v_star, x.s_EL - sys.eq.s_EL_star, x.v_F - sys.eq.v_star,
                         x.s_FE - sys.eq.s_FE_star);
      int k = observed - 1;
      if (k < 0 || k > 1) throw ValidationError("control_input: observed mode out of range");
      u_AV = gains->K_AV[static_cast<std::size_t>(k)].dot(xt) +
             gains->D_AV[static_cast<std::size_t>(k)] * (v_L - sys.eq.v_star);
      break;
    }
    case Scheme::automation_only:
      // Leader-tracking OVM baseline standing in for a production driving
      // system: comfort-tuned low gains on the ego's desired-speed curve, so
      // the law vanishes at the shared equilibrium and filters leader
      // transients heavily.
      u_AV = kAutoGapGain * (desired_speed(driver.curve, x.s_EL) - x.v_E) +
             kAutoSpeedGain * (v_L - x.v_E);
      break;
  }
  return {u_H, u_AV};
}

namespace {

struct Deriv {
  double dv_E, ds_EL, dv_F, ds_FE;
};

Deriv plant_rhs(const PlantState& x, double u, const FollowerModel& follower, double v_L) {
  Deriv d;
  d.dv_E = u;
  d.ds_EL = v_L - x.v_E;
  d.dv_F = follower_accel(follower, x.v_F, x.s_FE, x.s_EL, x.v_E, v_L);
  d.ds_FE = x.v_E - x.v_F;
  return d;
}

PlantState advance(const PlantState& x, const Deriv& d, double h) {
  return {x.v_E + h * d.dv_E, x.s_EL + h * d.ds_EL, x.v_F + h * d.dv_F, x.s_FE + h * d.ds_FE};
}

}  // namespace

PlantState step(const PlantState& x, double u, const FollowerModel& follower,
                const LeaderProfile& profile, double v_star, double t, double dt) {
  if (!(dt > 0.0)) throw ValidationError("step: dt must be positive");
  Deriv k1 = plant_rhs(x, u, follower, leader_speed(profile, t, v_star));
  double v_mid = leader_speed(profile, t + dt / 2.0, v_star);
  Deriv k2 = plant_rhs(advance(x, k1, dt / 2.0), u, follower, v_mid);
  Deriv k3 = plant_rhs(advance(x, k2, dt / 2.0), u, follower, v_mid);
  Deriv k4 = plant_rhs(advance(x, k3, dt), u, follower, leader_speed(profile, t + dt, v_star));
  PlantState next{
      x.v_E + dt / 6.0 * (k1.dv_E + 2.0 * k2.dv_E + 2.0 * k3.dv_E + k4.dv_E),
      x.s_EL + dt / 6.0 * (k1.ds_EL + 2.0 * k2.ds_EL + 2.0 * k3.ds_EL + k4.ds_EL),
      x.v_F + dt / 6.0 * (k1.dv_F + 2.0 * k2.dv_F + 2.0 * k3.dv_F + k4.dv_F),
      x.s_FE + dt / 6.0 * (k1.ds_FE + 2.0 * k2.ds_FE + 2.0 * k3.ds_FE + k4.ds_FE)};
  if (!std::isfinite(next.v_E) || !std::isfinite(next.s_EL) || !std::isfinite(next.v_F) ||
      !std::isfinite(next.s_FE))
    throw RuntimeAbort("step: integration produced a non-finite state");
  return next;
}

SimResult run(const SimConfig& config, const LinearMjls& sys, const ControllerGains* gains,
              const DriverModel& driver, const FollowerModel& follower, const JointGenerator& gen,
              const LeaderProfile& profile, const CompletionCriterion& criterion) {
  config.validate();
  profile.validate();
  criterion.validate();
  driver.validate();
  follower.validate();
  if (scheme_uses_gains(config.scheme) && gains == nullptr)
    throw ValidationError("run: scheme requires controller gains");

  const double dt = config.dt;
  const long n_steps = std::lround(config.horizon / dt);
  SimResult res;
  res.seed = config.seed;
  const std::size_t cap = static_cast<std::size_t>(n_steps) + 1;
  res.t.reserve(cap);

  // Initial hidden mode from the TD indicator on the initial state; the
  // observer starts synchronized.
  int eta0 = mode_from_td(task_difficulty(config.td, config.x0.v_E, config.x0.s_EL),
                          config.td.threshold);
  ModePath path;
  if (config.mode_source == ModeSource::markov)
    path = sample_path(gen, joint_index(eta0, eta0), config.horizon + dt, config.seed);

  Rng obs_rng(derive_seed(config.seed, 0xb5e7UL));
  const double flip_prob = 1.0 - std::exp(-config.obs.q * dt);

  PlantState x = config.x0;
  int eta = eta0, eta_hat = eta0;
  for (long i = 0; i <= n_steps; ++i) {
    double t = static_cast<double>(i) * dt;
    // Collision handling precedes everything touching the state.
    bool collided = x.s_EL <= 0.0 || (res.t_LC.has_value() && x.s_FE <= 0.0);
    if (collided) {
      res.collision = true;
      if (config.collision_guard) break;
    }

    double v_L = leader_speed(profile, t, config.v_star);
    if (config.mode_source == ModeSource::markov) {
      int z = path.state_at(t);
      eta = eta_of(z);
      eta_hat = etahat_of(z);
    } else {
      int eta_new = collided ? eta
                             : mode_from_td(task_difficulty(config.td, x.v_E, x.s_EL),
                                            config.td.threshold);
      if (i == 0) {
        eta_hat = eta_new;
      } else if (eta_new != eta) {
        eta_hat = obs_rng.bernoulli(config.obs.alpha) ? (eta_new == 1 ? 2 : 1) : eta_new;
      } else if (flip_prob > 0.0 && obs_rng.bernoulli(flip_prob)) {
        eta_hat = eta_hat == 1 ? 2 : 1;
      }
      eta = eta_new;
    }

    auto [u_H, u_AV] =
        control_input(config.scheme, sys, gains, x, v_L, eta, eta_hat, driver, follower);
    double u = u_H + u_AV;

    res.t.push_back(t);
    res.v_E.push_back(x.v_E);
    res.s_EL.push_back(x.s_EL);
    res.v_F.push_back(x.v_F);
    res.s_FE.push_back(x.s_FE);
    res.v_L.push_back(v_L);
    res.eta.push_back(eta);
    res.eta_hat.push_back(eta_hat);
    res.u_H.push_back(u_H);
    res.u_AV.push_back(u_AV);
    res.u.push_back(u);

    if (i > 0 && !res.t_LC.has_value() && check_completion(criterion, x, v_L)) res.t_LC = t;

    if (i < n_steps) x = step(x, u, follower, profile, config.v_star, t, dt);
  }
  return res;
}

std::string result_to_csv(const SimResult& r) {
  std::string out = "t,v_E,s_EL,v_F,s_FE,v_L,eta,eta_hat,u_H,u_AV,u\n";
  char buf[320];
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d,%.10g,%.10g,%.10g\n", r.t[i],
                  r.v_E[i], r.s_EL[i], r.v_F[i], r.s_FE[i], r.v_L[i], r.eta[i], r.eta_hat[i],
                  r.u_H[i], r.u_AV[i], r.u[i]);
    out += buf;
  }
  return out;
}

json profile_to_json(const LeaderProfile& profile) {
  json j;
  switch (profile.kind) {
    case LeaderProfile::Kind::constant:
      j["kind"] = "constant";
      break;
    case LeaderProfile::Kind::pulse:
      j["kind"] = "pulse";
      j["a_L"] = profile.a_L;
      j["t_L"] = profile.t_L;
      break;
    case LeaderProfile::Kind::replay:
      j["kind"] = "replay";
      j["times"] = profile.times;
      j["speeds"] = profile.speeds;
      break;
  }
  return j;
}

LeaderProfile profile_from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return LeaderProfile::constant();
  if (kind == "pulse") return LeaderProfile::pulse(j.at("a_L").get<double>(), j.at("t_L").get<double>());
  if (kind == "replay")
    return LeaderProfile::replay(j.at("times").get<std::vector<double>>(),
                                 j.at("speeds").get<std::vector<double>>());
  throw ValidationError("unknown leader profile kind: " + kind);
}

}  // namespace lcshare
