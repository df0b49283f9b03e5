#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "lcshare/errors.hpp"
#include "lcshare/metrics.hpp"
#include "lcshare/mjls.hpp"
#include "lcshare/sim.hpp"
#include "lcshare/synthesis.hpp"

using namespace lcshare;

namespace {

const DriverModel kDriver{0.25, 0.10, 0.18, 0.17, {20.0, 3.5, 20.5}};
const FollowerModel kFollower{0.26, 0.09, {28.0, 3.0, 22.0}};
const ModeRates kRates{0.0454, 0.1117};
const ObsParams kObs{0.05, 0.02};
const TdParams kTd{1.09, 0.30, 1.00, 1.0};
const double kVStar = 5.9;

const LinearMjls& table_system() {
  static const LinearMjls sys = linearize(kDriver, kFollower,
                                          find_equilibrium(kDriver, kFollower, kVStar));
  return sys;
}

const JointGenerator& table_generator() {
  static const JointGenerator gen = build_joint_generator(kRates, kObs);
  return gen;
}

// Zero-rate generator: the joint mode never leaves its initial state.
const JointGenerator& frozen_generator() {
  static const JointGenerator gen = build_joint_generator({0.0, 0.0}, {0.0, 0.0});
  return gen;
}

const ControllerGains& nominal_gains() {
  static const ControllerGains gains =
      synthesize_nominal(table_system(), table_generator(), {}).gains;
  return gains;
}

PlantState equilibrium_state() {
  const Equilibrium& eq = table_system().eq;
  return {kVStar, eq.s_EL_star, kVStar, eq.s_FE_star};
}

SimConfig base_config(Scheme scheme, std::uint64_t seed) {
  SimConfig cfg;
  cfg.scheme = scheme;
  cfg.x0 = equilibrium_state();
  cfg.v_star = kVStar;
  cfg.seed = seed;
  cfg.td = kTd;
  cfg.obs = kObs;
  return cfg;
}

const CompletionCriterion kCriterion{1.0, 8.8, 7.3};
const LeaderProfile kPulse = LeaderProfile::pulse(2.0, 2.0);

}  // namespace

TEST_CASE("leader_speed pulse anchors and constant tail") {
  CHECK(leader_speed(kPulse, 0.0, kVStar) == doctest::Approx(kVStar));
  CHECK(leader_speed(kPulse, 2.0, kVStar) == doctest::Approx(kVStar - 4.0));
  CHECK(leader_speed(kPulse, 3.0, kVStar) == doctest::Approx(kVStar - 2.0));
  CHECK(leader_speed(kPulse, 4.0, kVStar) == doctest::Approx(kVStar));
  CHECK(leader_speed(kPulse, 10.0, kVStar) == doctest::Approx(kVStar));
  CHECK(leader_speed(LeaderProfile::constant(), 7.0, kVStar) == kVStar);
  CHECK_THROWS_AS(leader_speed(kPulse, -0.1, kVStar), ValidationError);
}

TEST_CASE("leader_speed replay interpolates and clamps") {
  LeaderProfile rp = LeaderProfile::replay({0.0, 1.0, 3.0}, {5.0, 7.0, 6.0});
  CHECK(leader_speed(rp, 0.0, kVStar) == doctest::Approx(5.0));
  CHECK(leader_speed(rp, 0.5, kVStar) == doctest::Approx(6.0));
  CHECK(leader_speed(rp, 2.0, kVStar) == doctest::Approx(6.5));
  CHECK(leader_speed(rp, 5.0, kVStar) == doctest::Approx(6.0));  // clamp past the end
  CHECK_THROWS_AS(LeaderProfile::replay({0.0, 0.0}, {1.0, 2.0}), ValidationError);
  CHECK_THROWS_AS(LeaderProfile::replay({0.0}, {1.0}), ValidationError);
  CHECK_THROWS_AS(LeaderProfile::pulse(-1.0, 2.0), ValidationError);
}

TEST_CASE("leader profile JSON round trip") {
  for (const LeaderProfile& p : {LeaderProfile::constant(), LeaderProfile::pulse(2.0, 2.0),
                                 LeaderProfile::replay({0.0, 1.0}, {5.0, 6.0})}) {
    LeaderProfile q = profile_from_json(profile_to_json(p));
    CHECK(q.kind == p.kind);
    CHECK(q.a_L == p.a_L);
    CHECK(q.t_L == p.t_L);
    CHECK(q.times == p.times);
    CHECK(q.speeds == p.speeds);
  }
  CHECK_THROWS_AS(profile_from_json(nlohmann::json{{"kind", "spiral"}}), ValidationError);
}

TEST_CASE("check_completion matches the four strict conditions") {
  PlantState x;
  x.s_FE = 9.0;
  x.s_EL = 8.0;
  x.v_E = kVStar;
  x.v_F = kVStar;
  CHECK(check_completion(kCriterion, x, kVStar));
  x.s_FE = 8.8;  // boundary is strict
  CHECK_FALSE(check_completion(kCriterion, x, kVStar));
  x.s_FE = 9.0;
  x.s_EL = 10.0;
  x.v_E = kVStar + 20.0;  // large closing speed on the front gap
  CHECK_FALSE(check_completion(kCriterion, x, kVStar));
  x.v_E = kVStar;
  x.v_F = kVStar + 20.0;  // large closing speed on the rear gap
  CHECK_FALSE(check_completion(kCriterion, x, kVStar));
  CompletionCriterion bad{-1.0, 8.8, 7.3};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("scheme names round trip") {
  for (Scheme s : {Scheme::human_only, Scheme::nominal_shared, Scheme::mic_shared,
                   Scheme::automation_only})
    CHECK(scheme_from_string(scheme_name(s)) == s);
  CHECK_THROWS_AS(scheme_from_string("autopilot"), ValidationError);
  CHECK(scheme_uses_gains(Scheme::nominal_shared));
  CHECK(scheme_uses_gains(Scheme::mic_shared));
  CHECK_FALSE(scheme_uses_gains(Scheme::human_only));
  CHECK_FALSE(scheme_uses_gains(Scheme::automation_only));
}

TEST_CASE("control_input vanishes at the exact equilibrium for every scheme") {
  const LinearMjls& sys = table_system();
  PlantState eq = equilibrium_state();
  for (Scheme s : {Scheme::human_only, Scheme::nominal_shared, Scheme::mic_shared,
                   Scheme::automation_only}) {
    auto [u_H, u_AV] = control_input(s, sys, &nominal_gains(), eq, kVStar, 1, 1, kDriver,
                                     kFollower);
    CHECK(std::fabs(u_H) < 1e-9);
    CHECK(std::fabs(u_AV) < 1e-9);
  }
}

TEST_CASE("control_input unit perturbation picks out the gain entry") {
  const LinearMjls& sys = table_system();
  PlantState x = equilibrium_state();
  x.v_E += 1.0;  // x_tilde = [1, 0, 0, 0], v_L tilde = 0
  for (int k : {1, 2}) {
    auto [u_H, u_AV] = control_input(Scheme::nominal_shared, sys, &nominal_gains(), x, kVStar,
                                     1, k, kDriver, kFollower);
    (void)u_H;
    CHECK(u_AV == doctest::Approx(nominal_gains().K_AV[static_cast<std::size_t>(k - 1)](0))
                      .epsilon(1e-12));
  }
}

TEST_CASE("control_input delegates the human channel to human_accel") {
  const LinearMjls& sys = table_system();
  PlantState x{4.2, 11.0, 5.1, 9.4};
  double v_L = 5.4;
  for (int mode : {1, 2}) {
    auto [u_H, u_AV] = control_input(Scheme::human_only, sys, nullptr, x, v_L, mode, mode,
                                     kDriver, kFollower);
    CHECK(u_H == human_accel(kDriver, mode, x.v_E, x.s_EL, v_L));
    CHECK(u_AV == 0.0);
  }
  CHECK_THROWS_AS(control_input(Scheme::nominal_shared, sys, nullptr, x, v_L, 1, 1, kDriver,
                                kFollower),
                  ValidationError);
}

TEST_CASE("step holds the equilibrium as a fixed point") {
  PlantState eq = equilibrium_state();
  PlantState nx = step(eq, 0.0, kFollower, LeaderProfile::constant(), kVStar, 0.0, 0.01);
  CHECK(std::fabs(nx.v_E - eq.v_E) < 1e-12);
  CHECK(std::fabs(nx.s_EL - eq.s_EL) < 1e-12);
  CHECK(std::fabs(nx.v_F - eq.v_F) < 1e-12);
  CHECK(std::fabs(nx.s_FE - eq.s_FE) < 1e-12);
}

TEST_CASE("step integrates the front gap exactly for constant speeds") {
  PlantState x{4.0, 10.0, 5.0, 8.0};
  PlantState nx = step(x, 0.0, kFollower, LeaderProfile::constant(), kVStar, 0.0, 0.01);
  CHECK(nx.v_E == 4.0);
  CHECK(nx.s_EL == doctest::Approx(10.0 + (kVStar - 4.0) * 0.01).epsilon(1e-14));
}

TEST_CASE("step halving on a smooth fixed-input segment is fourth-order small") {
  auto integrate = [&](double dt) {
    PlantState s{5.0, 12.0, 4.0, 9.0};
    long n = std::lround(2.0 / dt);
    for (long i = 0; i < n; ++i)
      s = step(s, 0.0, kFollower, LeaderProfile::constant(), kVStar,
               static_cast<double>(i) * dt, dt);
    return s;
  };
  PlantState a = integrate(0.01), b = integrate(0.005);
  CHECK(std::fabs(a.v_E - b.v_E) < 1e-6);
  CHECK(std::fabs(a.s_EL - b.s_EL) < 1e-6);
  CHECK(std::fabs(a.v_F - b.v_F) < 1e-6);
  CHECK(std::fabs(a.s_FE - b.s_FE) < 1e-6);
}

TEST_CASE("equilibrium run stays at equilibrium and completes per criterion") {
  SimConfig cfg = base_config(Scheme::human_only, 1);
  cfg.obs = {0.0, 0.0};
  SimResult r = run(cfg, table_system(), nullptr, kDriver, kFollower, frozen_generator(),
                    LeaderProfile::constant(), kCriterion);
  const Equilibrium& eq = table_system().eq;
  double dev = 0.0;
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    dev = std::max(dev, std::fabs(r.v_E[i] - kVStar));
    dev = std::max(dev, std::fabs(r.s_EL[i] - eq.s_EL_star));
    dev = std::max(dev, std::fabs(r.v_F[i] - kVStar));
    dev = std::max(dev, std::fabs(r.s_FE[i] - eq.s_FE_star));
  }
  CHECK(dev <= 1e-9);
  // Rear threshold 8.8 sits above the equilibrium gap, so no completion ...
  CHECK_FALSE(r.t_LC.has_value());
  CHECK_FALSE(r.collision);
  CHECK(r.t.size() == 2001);
  // ... but a criterion already met at the start fires at the first sample.
  SimResult loose = run(cfg, table_system(), nullptr, kDriver, kFollower, frozen_generator(),
                        LeaderProfile::constant(), CompletionCriterion{1.0, 8.0, 7.0});
  REQUIRE(loose.t_LC.has_value());
  CHECK(*loose.t_LC == doctest::Approx(cfg.dt));
}

TEST_CASE("run input identity, mode-path consistency, and seed echo") {
  SimConfig cfg = base_config(Scheme::nominal_shared, 42);
  SimResult r = run(cfg, table_system(), &nominal_gains(), kDriver, kFollower,
                    table_generator(), kPulse, kCriterion);
  CHECK(r.seed == 42);
  REQUIRE(r.t.size() == r.u.size());
  for (std::size_t i = 0; i < r.t.size(); ++i) CHECK(r.u[i] == r.u_H[i] + r.u_AV[i]);

  // Modes must reproduce the sampled joint path at the grid times.
  int m0 = mode_from_td(task_difficulty(cfg.td, cfg.x0.v_E, cfg.x0.s_EL), cfg.td.threshold);
  ModePath path = sample_path(table_generator(), joint_index(m0, m0), cfg.horizon + cfg.dt,
                              cfg.seed);
  for (std::size_t i = 0; i < r.t.size(); i += 37) {
    int z = path.state_at(r.t[i]);
    CHECK(r.eta[i] == eta_of(z));
    CHECK(r.eta_hat[i] == etahat_of(z));
  }
}

TEST_CASE("run is deterministic and serializes byte-identically") {
  SimConfig cfg = base_config(Scheme::nominal_shared, 7);
  SimResult a = run(cfg, table_system(), &nominal_gains(), kDriver, kFollower,
                    table_generator(), kPulse, kCriterion);
  SimResult b = run(cfg, table_system(), &nominal_gains(), kDriver, kFollower,
                    table_generator(), kPulse, kCriterion);
  std::string ca = result_to_csv(a), cb = result_to_csv(b);
  CHECK(ca == cb);
  CHECK(ca.substr(0, ca.find('\n')) == "t,v_E,s_EL,v_F,s_FE,v_L,eta,eta_hat,u_H,u_AV,u");
  // A different seed yields a different mode path (hence different rows).
  cfg.seed = 8;
  SimResult c = run(cfg, table_system(), &nominal_gains(), kDriver, kFollower,
                    table_generator(), kPulse, kCriterion);
  CHECK(result_to_csv(c) != ca);
}

TEST_CASE("collision is flagged and the run truncated") {
  SimConfig cfg = base_config(Scheme::human_only, 3);
  cfg.x0 = PlantState{15.0, 0.5, 5.0, 8.0};
  SimResult r = run(cfg, table_system(), nullptr, kDriver, kFollower, table_generator(),
                    LeaderProfile::constant(), kCriterion);
  CHECK(r.collision);
  CHECK(r.t.back() < cfg.horizon - cfg.dt);
  CHECK_FALSE(r.t_LC.has_value());
}

TEST_CASE("run validates its configuration") {
  SimConfig cfg = base_config(Scheme::nominal_shared, 1);
  CHECK_THROWS_AS(run(cfg, table_system(), nullptr, kDriver, kFollower, table_generator(),
                      kPulse, kCriterion),
                  ValidationError);
  cfg.dt = -0.01;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.dt = 0.01;
  cfg.horizon = 0.001;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.horizon = 20.0;
  cfg.x0.s_EL = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("replay profiles drive the recorded leader speed") {
  LeaderProfile rp = LeaderProfile::replay({0.0, 5.0, 10.0, 20.0}, {5.9, 4.0, 6.5, 5.9});
  SimConfig cfg = base_config(Scheme::human_only, 11);
  SimResult r = run(cfg, table_system(), nullptr, kDriver, kFollower, table_generator(), rp,
                    kCriterion);
  for (std::size_t i = 0; i < r.t.size(); i += 101)
    CHECK(r.v_L[i] == doctest::Approx(leader_speed(rp, r.t[i], kVStar)).epsilon(1e-14));
}

TEST_CASE("td mode source recomputes the hidden mode from the live state") {
  SimConfig cfg = base_config(Scheme::human_only, 5);
  cfg.mode_source = ModeSource::td;
  cfg.obs = {0.0, 0.0};  // perfect observer
  SimResult r = run(cfg, table_system(), nullptr, kDriver, kFollower, table_generator(),
                    kPulse, kCriterion);
  for (std::size_t i = 0; i < r.t.size(); i += 53) {
    int want = mode_from_td(task_difficulty(kTd, r.v_E[i], r.s_EL[i]), kTd.threshold);
    CHECK(r.eta[i] == want);
    CHECK(r.eta_hat[i] == r.eta[i]);
  }
}

TEST_CASE("human-only Monte Carlo matches the published band") {
  double sum = 0.0, mn = 1e9;
  double worst_nominal = 0.0;
  for (int seed = 1; seed <= 100; ++seed) {
    SimConfig cfg = base_config(Scheme::human_only, static_cast<std::uint64_t>(seed));
    SimResult h = run(cfg, table_system(), nullptr, kDriver, kFollower, table_generator(),
                      kPulse, kCriterion);
    double g = empirical_gain(h, kVStar);
    sum += g;
    mn = std::min(mn, g);
    cfg.scheme = Scheme::nominal_shared;
    SimResult n = run(cfg, table_system(), &nominal_gains(), kDriver, kFollower,
                      table_generator(), kPulse, kCriterion);
    worst_nominal = std::max(worst_nominal, empirical_gain(n, kVStar));
  }
  double mean = sum / 100.0;
  CHECK(mean > 1.585 - 0.15);
  CHECK(mean < 1.585 + 0.15);
  CHECK(mn > 1.0);
  // Certified-energy bookkeeping: every nominal run respects the bound.
  CHECK(worst_nominal <= nominal_gains().gamma0 + 0.05);
  CHECK(worst_nominal <= 1.0);
}

TEST_CASE("nominal gamma_est is insensitive to step halving") {
  SimConfig cfg = base_config(Scheme::nominal_shared, 2);
  SimResult a = run(cfg, table_system(), &nominal_gains(), kDriver, kFollower,
                    table_generator(), kPulse, kCriterion);
  cfg.dt = 0.005;
  SimResult b = run(cfg, table_system(), &nominal_gains(), kDriver, kFollower,
                    table_generator(), kPulse, kCriterion);
  CHECK(std::fabs(empirical_gain(a, kVStar) - empirical_gain(b, kVStar)) < 1e-3);
}
