#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "json.hpp"
#include "lcshare/calib.hpp"
#include "lcshare/commands.hpp"
#include "lcshare/errors.hpp"
#include "lcshare/markov.hpp"
#include "lcshare/mjls.hpp"
#include "lcshare/rng.hpp"
#include "lcshare/scenario.hpp"
#include "lcshare/sim.hpp"

using namespace lcshare;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kScenarioDir = LCSHARE_SCENARIO_DIR;

// Fresh output directory under the system temp root, wiped per use.
std::string out_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "lcshare_cmd_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json jload(const std::string& path) { return json::parse(slurp(path)); }

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Bundled baseline scenario trimmed to a fast seed set; cases mutate copies.
Scenario base_scenario() {
  static const Scenario loaded = load_scenario(kScenarioDir + "/ngsim.json");
  Scenario sc = loaded;
  sc.seeds = derive_seeds(sc.seed_master, 8);
  return sc;
}

struct Captured {
  std::ostringstream log;
  CommandOptions opt;
  explicit Captured(const std::string& dir) {
    opt.out_dir = dir;
    opt.jobs = 1;
    opt.log = &log;
  }
  std::string text() const { return log.str(); }
};

// TD-driven human-only run rendered as canonical track CSV rows (ego crosses
// into lane 2 at t = 0.5), decimated to the 0.1 s data cadence.
std::string track_rows(const LeaderProfile& prof, double v0, double horizon, long id_base,
                       double x_base) {
  const DriverModel driver{0.25, 0.10, 0.18, 0.17, {20.0, 3.5, 20.5}};
  const FollowerModel follower{0.26, 0.09, {28.0, 3.0, 22.0}};
  Equilibrium eq = find_equilibrium(driver, follower, v0);
  LinearMjls sys = linearize(driver, follower, eq);
  JointGenerator gen = build_joint_generator({0.0454, 0.1117}, {0.05, 0.02});
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.horizon = horizon;
  cfg.scheme = Scheme::human_only;
  cfg.x0 = {v0, eq.s_EL_star, v0, eq.s_FE_star};
  cfg.v_star = v0;
  cfg.seed = 1;
  cfg.mode_source = ModeSource::td;
  cfg.td = {1.09, 0.30, 1.00, 1.0};
  cfg.obs = {0.0, 0.0};
  SimResult full = run(cfg, sys, nullptr, driver, follower, gen, prof, {1.0, 8.8, 7.3});

  std::vector<double> t, v_E, s_EL, v_F, s_FE, v_L;
  for (std::size_t i = 0; i < full.t.size(); i += 10) {
    t.push_back(full.t[i]);
    v_E.push_back(full.v_E[i]);
    s_EL.push_back(full.s_EL[i]);
    v_F.push_back(full.v_F[i]);
    s_FE.push_back(full.s_FE[i]);
    v_L.push_back(full.v_L[i]);
  }
  std::size_t n = t.size();
  std::vector<double> xL(n), xE(n), xF(n);
  xL[0] = x_base;
  for (std::size_t i = 1; i < n; ++i)
    xL[i] = xL[i - 1] + 0.5 * (v_L[i] + v_L[i - 1]) * (t[i] - t[i - 1]);
  for (std::size_t i = 0; i < n; ++i) {
    xE[i] = xL[i] - s_EL[i] - 4.5;
    xF[i] = xE[i] - s_FE[i] - 4.5;
  }
  std::string out;
  char buf[256];
  for (std::size_t i = 0; i < n; ++i) {
    int ego_lane = t[i] < 0.5 ? 1 : 2;
    std::snprintf(buf, sizeof(buf), "%.10g,%ld,%d,%.10g,%.10g\n", t[i], id_base, ego_lane, xE[i],
                  v_E[i]);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%.10g,%ld,%d,%.10g,%.10g\n", t[i], id_base + 1, 2, xL[i],
                  v_L[i]);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%.10g,%ld,%d,%.10g,%.10g\n", t[i], id_base + 2, 2, xF[i],
                  v_F[i]);
    out += buf;
  }
  return out;
}

std::string write_temp(const std::string& name, const std::string& content) {
  fs::path dir = fs::temp_directory_path() / "lcshare_cmd_tests" / "inputs";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p.string();
}

}  // namespace

TEST_CASE("load_scenario rejects bad inputs with validation errors") {
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ValidationError);

  std::string bad = write_temp("bad.json", "{ not json\n");
  try {
    load_scenario(bad);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("not valid JSON") != std::string::npos);
  }

  std::string incomplete = write_temp("incomplete.json", "{\"name\": \"x\"}\n");
  try {
    load_scenario(incomplete);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("missing field 'v_star'") != std::string::npos);
  }
}

TEST_CASE("bundled scenarios load, validate, and round-trip through JSON") {
  for (const char* name : {"/ngsim.json", "/ngsim_replay.json", "/tgsim_replay.json"}) {
    Scenario sc = load_scenario(kScenarioDir + name);
    CHECK_NOTHROW(sc.validate());
    Scenario back = scenario_from_json(scenario_to_json(sc));
    CHECK(back.v_star == doctest::Approx(sc.v_star));
    CHECK(back.driver.a1 == doctest::Approx(sc.driver.a1));
    CHECK(back.follower.b == doctest::Approx(sc.follower.b));
    CHECK(back.rates.lambda12 == doctest::Approx(sc.rates.lambda12));
    CHECK(back.criterion.s_front_thr == doctest::Approx(sc.criterion.s_front_thr));
    CHECK(back.schemes == sc.schemes);
    CHECK(back.seeds == sc.seeds);
  }
}

TEST_CASE("derive_seeds is deterministic and collision-free") {
  std::vector<std::uint64_t> a = derive_seeds(1, 16);
  std::vector<std::uint64_t> b = derive_seeds(1, 16);
  REQUIRE(a.size() == 16);
  CHECK(a == b);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = i + 1; k < a.size(); ++k) CHECK(a[i] != a[k]);
  std::vector<std::uint64_t> c = derive_seeds(2, 16);
  CHECK(a.front() != c.front());
}

TEST_CASE("command exit codes: validation, infeasible, and runtime failures") {
  Scenario sc = base_scenario();

  SUBCASE("synth rejects schemes without a controller") {
    sc.schemes = {Scheme::human_only};
    Captured cap(out_dir("exit_human"));
    CHECK(cmd_synth(sc, cap.opt) == kExitValidation);
    std::string log = cap.text();
    CHECK(log.find("validation error") != std::string::npos);
    CHECK(log.find("no controller to synthesize") != std::string::npos);
  }

  SUBCASE("synth reports infeasibility when the epsilon grid is hopeless") {
    sc.schemes = {Scheme::nominal_shared};
    sc.epsilon_grid = {1e-12};
    Captured cap(out_dir("exit_infeas"));
    CHECK(cmd_synth(sc, cap.opt) == kExitInfeasible);
    std::string log = cap.text();
    CHECK(log.find("infeasible") != std::string::npos);
  }

  SUBCASE("unwritable output directory aborts") {
    sc.schemes = {Scheme::nominal_shared};
    Captured cap("/dev/null/nested");
    CHECK(cmd_synth(sc, cap.opt) == kExitRuntimeAbort);
    CHECK(!cap.text().empty());
  }

  SUBCASE("replay requires an event file") {
    sc.event_file.clear();
    Captured cap(out_dir("exit_replay"));
    CHECK(cmd_replay(sc, cap.opt) == kExitValidation);
    std::string log = cap.text();
    CHECK(log.find("no event_file") != std::string::npos);
  }

  SUBCASE("calibrate requires a data file") {
    sc.data_file.clear();
    Captured cap(out_dir("exit_calib"));
    CHECK(cmd_calibrate(sc, cap.opt) == kExitValidation);
    std::string log = cap.text();
    CHECK(log.find("no data_file") != std::string::npos);
  }

  SUBCASE("sweeps require nonempty grids") {
    sc.beta_grid.clear();
    Captured cap1(out_dir("exit_bgrid"));
    CHECK(cmd_sweep_beta(sc, cap1.opt) == kExitValidation);
    sc.alpha_grid.clear();
    Captured cap2(out_dir("exit_ogrid"));
    CHECK(cmd_sweep_obs(sc, cap2.opt) == kExitValidation);
  }
}

TEST_CASE("cmd_synth writes a certified design and is byte-deterministic") {
  Scenario sc = base_scenario();
  sc.schemes = {Scheme::nominal_shared};

  std::string dir_a = out_dir("synth_a");
  Captured cap_a(dir_a);
  REQUIRE(cmd_synth(sc, cap_a.opt) == kExitOk);
  CHECK(cap_a.text().find("certificate PASS") != std::string::npos);

  json gains = jload(dir_a + "/gains.json");
  double gamma0 = gains.at("gamma0").get<double>();
  double gamma_cert = gains.at("gamma_cert").get<double>();
  CHECK(gamma0 <= 1.0);
  CHECK(gamma_cert >= gamma0);
  CHECK(gains.at("mic").get<bool>() == false);
  json K = gains.at("K_AV");
  REQUIRE(K.size() == 2);
  const json& K_row = K.at(0);
  REQUIRE(K_row.size() == 4);
  json D = gains.at("D_AV");
  REQUIRE(D.size() == 2);

  json cert = jload(dir_a + "/certificate.json");
  CHECK(cert.at("pass").get<bool>());
  const json& eigs = cert.at("max_eig");
  REQUIRE(eigs.size() == 4);  // one LMI block per joint (mode, observation) pair
  for (const json& e : eigs) CHECK(e.get<double>() < 0.0);
  CHECK(cert.at("gamma").get<double>() == doctest::Approx(gamma_cert));

  json diag = jload(dir_a + "/synth_diagnostics.json");
  REQUIRE(diag.is_array());  // one entry per epsilon attempt
  CHECK(!diag.empty());
  bool any_feasible_attempt = false;
  for (const json& entry : diag)
    if (entry.contains("gamma0")) any_feasible_attempt = true;
  CHECK(any_feasible_attempt);

  std::string dir_b = out_dir("synth_b");
  Captured cap_b(dir_b);
  REQUIRE(cmd_synth(sc, cap_b.opt) == kExitOk);
  for (const char* f : {"/gains.json", "/certificate.json", "/synth_diagnostics.json"}) {
    std::string fa = slurp(dir_a + f);
    std::string fb = slurp(dir_b + f);
    CHECK(fa == fb);
  }
}

TEST_CASE("cmd_montecarlo: per-scheme CSVs, summary aggregates, determinism") {
  Scenario sc = base_scenario();
  sc.schemes = {Scheme::human_only, Scheme::nominal_shared};

  std::string dir_a = out_dir("mc_a");
  Captured cap_a(dir_a);
  REQUIRE(cmd_montecarlo(sc, cap_a.opt) == kExitOk);

  std::vector<std::string> csv = lines_of(slurp(dir_a + "/mc_human_only.csv"));
  REQUIRE(csv.size() == 1 + sc.seeds.size());
  CHECK(csv[0] ==
        "trial,seed,gamma_est,r_int,E_AV,E_H,rms_aE,rms_aF,t_LC,obs_accuracy,follow_delay,"
        "collision");
  for (std::size_t i = 0; i < sc.seeds.size(); ++i) {
    std::vector<std::string> cells = fields_of(csv[i + 1]);
    REQUIRE(cells.size() == 12);
    CHECK(cells[0] == std::to_string(i));
    CHECK(cells[1] == std::to_string(sc.seeds[i]));
    CHECK(std::stod(cells[2]) > 1.0);  // human-only amplifies the disturbance
    CHECK(cells[4] == "0");            // E_AV identically zero without automation
    CHECK(cells[11] == "0");
  }

  json summary = jload(dir_a + "/mc_summary.json");
  CHECK(summary.at("meta").at("command").get<std::string>() == "montecarlo");
  CHECK(summary.at("meta").at("n_seeds").get<std::size_t>() == sc.seeds.size());
  const json& human = summary.at("schemes").at("human_only");
  const json& nominal = summary.at("schemes").at("nominal_shared");
  CHECK(human.at("gamma_est").at("min").get<double>() > 1.0);
  CHECK(nominal.at("gamma_est").at("max").get<double>() <= 1.0);
  CHECK(nominal.at("gamma_est").at("mean").get<double>() <
        human.at("gamma_est").at("mean").get<double>());
  CHECK(human.at("E_AV").at("max").get<double>() == 0.0);
  CHECK(nominal.at("E_AV").at("min").get<double>() > 0.0);
  CHECK(human.at("n_runs").get<int>() == 8);

  std::string dir_b = out_dir("mc_b");
  Captured cap_b(dir_b);
  REQUIRE(cmd_montecarlo(sc, cap_b.opt) == kExitOk);
  for (const char* f : {"/mc_human_only.csv", "/mc_nominal_shared.csv", "/mc_summary.json"}) {
    std::string fa = slurp(dir_a + f);
    std::string fb = slurp(dir_b + f);
    CHECK(fa == fb);
  }
}

TEST_CASE("cmd_montecarlo with one seed reports degenerate statistics") {
  Scenario sc = base_scenario();
  sc.schemes = {Scheme::human_only};
  sc.seeds = {42};
  std::string dir = out_dir("mc_single");
  Captured cap(dir);
  REQUIRE(cmd_montecarlo(sc, cap.opt) == kExitOk);
  json stats = jload(dir + "/mc_summary.json").at("schemes").at("human_only").at("gamma_est");
  double mean = stats.at("mean").get<double>();
  CHECK(stats.at("min").get<double>() == mean);
  CHECK(stats.at("max").get<double>() == mean);
  CHECK(stats.at("variance").get<double>() == 0.0);
}

TEST_CASE("cmd_sweep_beta: nominal baseline row plus monotone effort trade-off") {
  Scenario sc = base_scenario();
  sc.schemes = {Scheme::mic_shared};
  sc.beta_grid = {0.5, 2.0};

  std::string dir = out_dir("sweep_beta");
  Captured cap(dir);
  REQUIRE(cmd_sweep_beta(sc, cap.opt) == kExitOk);

  std::vector<std::string> csv = lines_of(slurp(dir + "/sweep_beta.csv"));
  REQUIRE(csv.size() == 4);  // header + beta in {0, 0.5, 2}
  CHECK(csv[0] ==
        "beta,feasible,gamma0,gamma_cert,cert_pass,gamma_est_mean,r_int_mean,rms_aE_mean,"
        "rms_aF_mean,t_LC_mean,completion_rate,collision_rate");

  json rows = jload(dir + "/sweep_beta.json").at("rows");
  REQUIRE(rows.size() == 3);
  CHECK(rows.at(0).at("beta").get<double>() == 0.0);
  std::vector<double> gamma0s, r_ints;
  for (const json& row : rows) {
    CHECK(row.at("feasible").get<bool>());
    CHECK(row.at("cert_pass").get<bool>());
    gamma0s.push_back(row.at("gamma0").get<double>());
    r_ints.push_back(row.at("aggregate").at("r_int").at("mean").get<double>());
  }
  CHECK(gamma0s[0] <= 1.0);            // nominal attenuates
  CHECK(gamma0s[1] <= gamma0s[2]);     // heavier effort penalty costs attenuation
  CHECK(r_ints[1] > r_ints[2]);        // ...and buys a smaller automation share
  CHECK(r_ints[0] > r_ints[2]);
}

TEST_CASE("cmd_sweep_obs: perfect-observation corner is exact, errors degrade it") {
  Scenario sc = base_scenario();
  sc.schemes = {Scheme::nominal_shared};
  sc.alpha_grid = {0.0, 0.3};
  sc.q_grid = {0.0};

  std::string dir = out_dir("sweep_obs");
  Captured cap(dir);
  REQUIRE(cmd_sweep_obs(sc, cap.opt) == kExitOk);

  std::vector<std::string> csv = lines_of(slurp(dir + "/sweep_obs.csv"));
  REQUIRE(csv.size() == 3);
  CHECK(csv[0] ==
        "alpha,q,feasible,gamma0,gamma_cert,cert_pass,accuracy_mean,follow_delay_mean,"
        "gamma_est_mean,completion_rate");

  json rows = jload(dir + "/sweep_obs.json").at("rows");
  REQUIRE(rows.size() == 2);
  const json& corner = rows.at(0);
  CHECK(corner.at("alpha").get<double>() == 0.0);
  CHECK(corner.at("q").get<double>() == 0.0);
  CHECK(corner.at("feasible").get<bool>());
  CHECK(corner.at("cert_pass").get<bool>());
  CHECK(corner.at("aggregate").at("obs_accuracy").at("mean").get<double>() == 1.0);
  CHECK(corner.at("aggregate").at("follow_delay").at("mean").get<double>() == 0.0);

  const json& noisy = rows.at(1);
  CHECK(noisy.at("feasible").get<bool>());
  CHECK(noisy.at("aggregate").at("obs_accuracy").at("mean").get<double>() < 1.0);
  CHECK(noisy.at("aggregate").at("follow_delay").at("mean").get<double>() > 0.0);
}

TEST_CASE("cmd_replay reproduces the bundled merge events") {
  SUBCASE("shared control beats the human driver on the pulse-tail event") {
    Scenario sc = load_scenario(kScenarioDir + "/ngsim_replay.json");
    std::string dir_a = out_dir("replay_ngsim_a");
    Captured cap_a(dir_a);
    REQUIRE(cmd_replay(sc, cap_a.opt) == kExitOk);

    json report = jload(dir_a + "/replay_report.json");
    const json& event = report.at("event");
    CHECK(event.at("ego_id").get<long>() == 101);
    CHECK(event.at("leader_id").get<long>() == 102);
    CHECK(event.at("follower_id").get<long>() == 103);
    CHECK(event.at("t_cross").get<double>() == doctest::Approx(0.5).epsilon(1e-9));
    double front_gap = event.at("front_gap_at_cross").get<double>();
    double rear_gap = event.at("rear_gap_at_cross").get<double>();
    CHECK(front_gap == doctest::Approx(sc.criterion.s_front_thr).epsilon(1e-6));
    CHECK(rear_gap == doctest::Approx(sc.criterion.s_rear_thr).epsilon(1e-6));

    const json& human = report.at("schemes").at("human_only");
    const json& mic = report.at("schemes").at("mic_shared");
    REQUIRE(!human.at("t_LC").is_null());
    REQUIRE(!mic.at("t_LC").is_null());
    double t_human = human.at("t_LC").get<double>();
    double t_mic = mic.at("t_LC").get<double>();
    CHECK(t_mic < t_human);
    CHECK(mic.at("rms_aE").get<double>() < human.at("rms_aE").get<double>());

    std::vector<std::string> trace = lines_of(slurp(dir_a + "/replay_mic_shared.csv"));
    CHECK(trace[0] == "t,v_E,s_EL,v_F,s_FE,v_L,eta,eta_hat,u_H,u_AV,u");
    REQUIRE(trace.size() >= 2);

    std::string dir_b = out_dir("replay_ngsim_b");
    Captured cap_b(dir_b);
    REQUIRE(cmd_replay(sc, cap_b.opt) == kExitOk);
    std::string report_a = slurp(dir_a + "/replay_report.json");
    std::string report_b = slurp(dir_b + "/replay_report.json");
    CHECK(report_a == report_b);
    std::string trace_a = slurp(dir_a + "/replay_mic_shared.csv");
    std::string trace_b = slurp(dir_b + "/replay_mic_shared.csv");
    CHECK(trace_a == trace_b);
  }

  SUBCASE("shared control beats the automation baseline on the oscillatory event") {
    Scenario sc = load_scenario(kScenarioDir + "/tgsim_replay.json");
    std::string dir = out_dir("replay_tgsim");
    Captured cap(dir);
    REQUIRE(cmd_replay(sc, cap.opt) == kExitOk);

    json report = jload(dir + "/replay_report.json");
    const json& event = report.at("event");
    CHECK(event.at("ego_id").get<long>() == 201);
    CHECK(event.at("front_gap_at_cross").get<double>() ==
          doctest::Approx(sc.criterion.s_front_thr).epsilon(1e-6));
    CHECK(event.at("rear_gap_at_cross").get<double>() ==
          doctest::Approx(sc.criterion.s_rear_thr).epsilon(1e-6));

    const json& autom = report.at("schemes").at("automation_only");
    const json& mic = report.at("schemes").at("mic_shared");
    REQUIRE(!autom.at("t_LC").is_null());
    REQUIRE(!mic.at("t_LC").is_null());
    CHECK(mic.at("t_LC").get<double>() < autom.at("t_LC").get<double>());
    CHECK(mic.at("gamma_est").get<double>() > autom.at("gamma_est").get<double>());
    CHECK(mic.at("gamma_est").get<double>() <= 1.0);
  }
}

TEST_CASE("cmd_replay rejects events without a target-lane follower") {
  std::string csv = "t,vehicle_id,lane_id,x,v\n";
  char buf[128];
  for (int i = 0; i <= 10; ++i) {
    double t = 0.1 * i;
    std::snprintf(buf, sizeof(buf), "%.1f,1,%d,%.2f,10\n", t, i < 5 ? 1 : 2, 50.0 + 10.0 * t);
    csv += buf;
    std::snprintf(buf, sizeof(buf), "%.1f,2,2,%.2f,10\n", t, 60.0 + 10.0 * t);
    csv += buf;
  }
  std::string path = write_temp("no_follower.csv", csv);

  Scenario sc = base_scenario();
  sc.event_file = path;
  Captured cap(out_dir("replay_nofol"));
  CHECK(cmd_replay(sc, cap.opt) == kExitValidation);
  std::string log = cap.text();
  CHECK(log.find("no usable lane-change event") != std::string::npos);
  CHECK(log.find("no follower in target lane") != std::string::npos);
}

TEST_CASE("cmd_calibrate runs the pipeline end to end on synthetic data") {
  std::string csv = "t,vehicle_id,lane_id,x,v\n";
  csv += track_rows(LeaderProfile::replay({0.0, 5.0, 50.0, 60.0}, {2.0, 2.0, 16.0, 16.0}), 2.0,
                    60.0, 10, 1000.0);
  csv += track_rows(LeaderProfile::pulse(2.0, 2.0), 5.9, 20.0, 20, 6000.0);
  std::string path = write_temp("calib_corpus.csv", csv);

  Scenario sc = base_scenario();
  sc.data_file = path;
  sc.event_opts.window = 100.0;
  std::string dir = out_dir("calibrate");
  Captured cap(dir);
  REQUIRE(cmd_calibrate(sc, cap.opt) == kExitOk);

  json result = jload(dir + "/calibration.json");
  CHECK(result.at("meta").at("command").get<std::string>() == "calibrate");
  CHECK(result.at("n_events").get<int>() == 2);
  for (const char* key : {"driver", "follower", "rates", "td", "thresholds", "fit"})
    CHECK(result.contains(key));
  CHECK(result.at("fit").at("driver_converged").get<bool>());
  CHECK(result.at("fit").at("follower_converged").get<bool>());
  // Loose sanity only; tight recovery oracles live in the calibration suite.
  double a1 = result.at("driver").at("a1").get<double>();
  double fa = result.at("follower").at("a").get<double>();
  CHECK(a1 > 0.05);
  CHECK(a1 < 0.6);
  CHECK(fa > 0.05);
  CHECK(fa < 0.6);
  CHECK(result.at("thresholds").at("s_front_thr").get<double>() > 0.0);
  CHECK(result.at("td").at("T_des").get<double>() > 0.0);
}

TEST_CASE("cmd_calibrate rejects a corpus without events") {
  std::string path = write_temp("empty_corpus.csv", "t,vehicle_id,lane_id,x,v\n");
  Scenario sc = base_scenario();
  sc.data_file = path;
  Captured cap(out_dir("calibrate_empty"));
  CHECK(cmd_calibrate(sc, cap.opt) == kExitValidation);
  std::string log = cap.text();
  CHECK(log.find("no lane-change events") != std::string::npos);
}

#ifdef LCSHARE_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string("\"") + LCSHARE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("CLI binary: subcommands, overrides, and exit codes") {
  std::string dir = out_dir("cli_synth");
  std::string scenario = kScenarioDir + "/ngsim.json";
  int rc = run_cli("synth --scenario \"" + scenario +
                   "\" --scheme nominal_shared --jobs 1 --out \"" + dir + "\"");
  CHECK(rc == kExitOk);
  json cert = jload(dir + "/certificate.json");
  CHECK(cert.at("pass").get<bool>());

  CHECK(run_cli("synth") == kExitValidation);                             // missing --scenario
  CHECK(run_cli("bogus --scenario \"" + scenario + "\"") == kExitValidation);
  CHECK(run_cli("synth --scenario /nonexistent.json") == kExitValidation);
  CHECK(run_cli("synth --scenario \"" + scenario + "\" --scheme warp_drive") ==
        kExitValidation);
}
#endif
