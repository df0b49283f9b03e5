#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lcshare/markov.hpp"
#include "lcshare/models.hpp"
#include "lcshare/synthesis.hpp"

namespace lcshare {

// Absolute state of the three-vehicle chain (ego, its leader, its follower).
struct PlantState {
  double v_E = 0.0;
  double s_EL = 0.0;
  double v_F = 0.0;
  double s_FE = 0.0;
};

enum class Scheme { human_only, nominal_shared, mic_shared, automation_only };
const char* scheme_name(Scheme s);
Scheme scheme_from_string(const std::string& name);  // throws ValidationError
bool scheme_uses_gains(Scheme s);

// Leader speed source: symmetric brake-accelerate pulse, replayed series, or
// constant cruising at v_star.
struct LeaderProfile {
  enum class Kind { constant, pulse, replay };
  Kind kind = Kind::constant;
  double a_L = 0.0;  // pulse depth slope, m/s^2
  double t_L = 0.0;  // pulse half-duration, s
  std::vector<double> times;   // replay
  std::vector<double> speeds;  // replay
  void validate() const;

  static LeaderProfile constant();
  static LeaderProfile pulse(double a_L, double t_L);
  static LeaderProfile replay(std::vector<double> times, std::vector<double> speeds);
};

double leader_speed(const LeaderProfile& profile, double t, double v_star);

// Four simultaneous strict gap / time-to-collision conditions.
struct CompletionCriterion {
  double tau = 1.0;
  double s_rear_thr = 0.0;   // on s_FE
  double s_front_thr = 0.0;  // on s_EL
  void validate() const;
};

bool check_completion(const CompletionCriterion& c, const PlantState& x, double v_L);

// Where the hidden mode comes from during a run: the sampled Markov path (the
// Monte Carlo experiments) or the TD indicator evaluated on the live state
// with the conditional observer (replay/calibration analyses).
enum class ModeSource { markov, td };

struct SimConfig {
  double dt = 0.01;
  double horizon = 20.0;
  Scheme scheme = Scheme::human_only;
  PlantState x0;
  double v_star = 0.0;
  std::uint64_t seed = 0;
  bool collision_guard = true;
  ModeSource mode_source = ModeSource::markov;
  TdParams td{1.0, 0.0, 1.0, 1.0};  // initial-mode labeling and td source
  ObsParams obs{0.0, 0.0};          // observer channel for the td source
  void validate() const;
};

struct SimResult {
  std::vector<double> t;
  std::vector<double> v_E, s_EL, v_F, s_FE, v_L;
  std::vector<int> eta, eta_hat;
  std::vector<double> u_H, u_AV, u;
  std::optional<double> t_LC;
  bool collision = false;
  std::uint64_t seed = 0;
};

// (u_H, u_AV) for one sample. gains may be null for schemes that ignore it.
std::pair<double, double> control_input(Scheme scheme, const LinearMjls& sys,
                                        const ControllerGains* gains, const PlantState& x,
                                        double v_L, int hidden, int observed,
                                        const DriverModel& driver, const FollowerModel& follower);

// One classical fourth-order step of the plant with the ego input u held
// constant (zero-order hold); the leader speed is evaluated exactly at the
// stage times. Throws RuntimeAbort on non-finite states.
PlantState step(const PlantState& x, double u, const FollowerModel& follower,
                const LeaderProfile& profile, double v_star, double t, double dt);

SimResult run(const SimConfig& config, const LinearMjls& sys, const ControllerGains* gains,
              const DriverModel& driver, const FollowerModel& follower, const JointGenerator& gen,
              const LeaderProfile& profile, const CompletionCriterion& criterion);

// CSV with the fixed column order:
// t,v_E,s_EL,v_F,s_FE,v_L,eta,eta_hat,u_H,u_AV,u
std::string result_to_csv(const SimResult& r);
nlohmann::json profile_to_json(const LeaderProfile& profile);
LeaderProfile profile_from_json(const nlohmann::json& j);

}  // namespace lcshare
