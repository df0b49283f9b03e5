#include "lcshare/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lcshare/calib.hpp"
#include "lcshare/errors.hpp"
#include "lcshare/metrics.hpp"
#include "lcshare/mjls.hpp"
#include "lcshare/parallel.hpp"
#include "lcshare/sim.hpp"
#include "lcshare/synthesis.hpp"

namespace lcshare {

using nlohmann::json;

namespace {

std::ostream& log_of(const CommandOptions& opt) {
  static std::ostream null_stream(nullptr);  // null streambuf: writes are no-ops
  return opt.log ? *opt.log : null_stream;
}

void write_file(const CommandOptions& opt, const std::string& name, const std::string& content) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  fs::path p = fs::path(opt.out_dir) / name;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw RuntimeAbort("cannot open '" + p.string() + "' for writing");
  out << content;
  if (!out) throw RuntimeAbort("short write to '" + p.string() + "'");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// CSV cell: fixed shortest-stable formatting, empty for missing values.
std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int guarded(const CommandOptions& opt, const std::function<int()>& body) {
  std::ostream& log = log_of(opt);
  try {
    return body();
  } catch (const ValidationError& e) {
    log << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InfeasibleError& e) {
    log << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const RuntimeAbort& e) {
    log << "runtime abort: " << e.what() << "\n";
    return kExitRuntimeAbort;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitRuntimeAbort;
  }
}

// Scenario-derived fixed pieces shared by every run of a command.
struct Bench {
  Equilibrium eq;
  LinearMjls sys;
  JointGenerator gen;
};

Bench make_bench(const Scenario& sc) {
  Equilibrium eq = find_equilibrium(sc.driver, sc.follower, sc.v_star);
  LinearMjls sys = linearize(sc.driver, sc.follower, eq);
  JointGenerator gen = build_joint_generator(sc.rates, sc.obs);
  return {eq, sys, gen};
}

SynthOptions synth_options(const Scenario& sc, const CommandOptions& opt) {
  SynthOptions so;
  so.jobs = opt.jobs;
  if (!sc.epsilon_grid.empty()) so.epsilon_grid = sc.epsilon_grid;
  return so;
}

SimConfig base_config(const Scenario& sc, const Bench& b, Scheme scheme) {
  SimConfig cfg;
  cfg.dt = sc.dt;
  cfg.horizon = sc.horizon;
  cfg.scheme = scheme;
  cfg.x0 = sc.x0 ? *sc.x0 : PlantState{sc.v_star, b.eq.s_EL_star, sc.v_star, b.eq.s_FE_star};
  cfg.v_star = sc.v_star;
  cfg.mode_source = sc.mode_source;
  cfg.td = sc.td;
  cfg.obs = sc.obs;
  return cfg;
}

// Paired-seed Monte Carlo: one run per scenario seed, reports ordered by
// trial index regardless of worker count.
std::vector<MetricReport> monte_carlo(const Scenario& sc, const Bench& b,
                                      const JointGenerator& gen, Scheme scheme,
                                      const ControllerGains* gains, int jobs) {
  SimConfig proto = base_config(sc, b, scheme);
  std::vector<MetricReport> reports(sc.seeds.size());
  parallel_for(sc.seeds.size(), jobs, [&](std::size_t i) {
    SimConfig cfg = proto;
    cfg.seed = sc.seeds[i];
    SimResult r =
        run(cfg, b.sys, gains, sc.driver, sc.follower, gen, sc.disturbance, sc.criterion);
    reports[i] = metric_report(r, sc.v_star, sc.follower);
  });
  return reports;
}

std::string mc_csv(const std::vector<std::uint64_t>& seeds,
                   const std::vector<MetricReport>& reports) {
  std::string out =
      "trial,seed,gamma_est,r_int,E_AV,E_H,rms_aE,rms_aF,t_LC,obs_accuracy,follow_delay,"
      "collision\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const MetricReport& r = reports[i];
    out += std::to_string(i) + "," + std::to_string(seeds[i]) + "," + num(r.gamma_est) + "," +
           num(r.r_int) + "," + num(r.E_AV) + "," + num(r.E_H) + "," + num(r.rms_aE) + "," +
           num(r.rms_aF) + "," + (r.t_LC ? num(*r.t_LC) : std::string()) + "," +
           num(r.obs_accuracy) + "," + num(r.follow_delay) + "," + (r.collision ? "1" : "0") +
           "\n";
  }
  return out;
}

// Lazily synthesized, cached controllers for the schemes of one command.
class GainsCache {
 public:
  GainsCache(const Bench& b, const Scenario& sc, const SynthOptions& so)
      : b_(b), sc_(sc), so_(so) {}

  const SynthesisResult& nominal() {
    if (!nominal_) nominal_ = synthesize_nominal(b_.sys, b_.gen, so_);
    return *nominal_;
  }

  const SynthesisResult& mic(double beta) {
    auto it = mic_.find(beta);
    if (it == mic_.end())
      it = mic_.emplace(beta, synthesize_mic(b_.sys, b_.gen, beta, so_)).first;
    return it->second;
  }

  // Null for schemes that run without a synthesized controller.
  const ControllerGains* for_scheme(Scheme s) {
    switch (s) {
      case Scheme::human_only:
        return nullptr;
      case Scheme::nominal_shared:
      case Scheme::automation_only:
        return &nominal().gains;
      case Scheme::mic_shared:
        return &mic(sc_.beta).gains;
    }
    return nullptr;
  }

 private:
  const Bench& b_;
  const Scenario& sc_;
  SynthOptions so_;
  std::optional<SynthesisResult> nominal_;
  std::map<double, SynthesisResult> mic_;
};

json meta_block(const Scenario& sc, const char* command) {
  return json{{"command", command}, {"scenario", sc.name}, {"n_seeds", sc.seeds.size()}};
}

}  // namespace

int cmd_synth(const Scenario& sc, const CommandOptions& opt) {
  return guarded(opt, [&]() -> int {
    sc.validate();
    Scheme scheme = sc.primary_scheme();
    if (!scheme_uses_gains(scheme))
      throw ValidationError(std::string("synth: scheme '") + scheme_name(scheme) +
                            "' has no controller to synthesize");
    Bench b = make_bench(sc);
    SynthOptions so = synth_options(sc, opt);
    SynthesisResult res = scheme == Scheme::mic_shared
                              ? synthesize_mic(b.sys, b.gen, sc.beta, so)
                              : synthesize_nominal(b.sys, b.gen, so);
    CertReport rep = certify_dissipation(b.sys, b.gen, res.gains, res.gains.beta);
    write_file(opt, "gains.json", dump(gains_to_json(res.gains)));
    write_file(opt, "synth_diagnostics.json", dump(diagnostics_to_json(res.diagnostics)));
    write_file(opt, "certificate.json", dump(cert_report_to_json(rep)));
    log_of(opt) << "synth " << scheme_name(scheme) << ": gamma0=" << res.gains.gamma0
                << " gamma_cert=" << res.gains.gamma_cert << " certificate "
                << (rep.pass ? "PASS" : "FAIL") << "\n";
    return rep.pass ? kExitOk : kExitInfeasible;
  });
}

int cmd_montecarlo(const Scenario& sc, const CommandOptions& opt) {
  return guarded(opt, [&]() -> int {
    sc.validate();
    Bench b = make_bench(sc);
    GainsCache cache(b, sc, synth_options(sc, opt));
    json summary;
    summary["meta"] = meta_block(sc, "montecarlo");
    summary["schemes"] = json::object();
    for (Scheme scheme : sc.schemes) {
      const ControllerGains* gains = cache.for_scheme(scheme);
      std::vector<MetricReport> reports = monte_carlo(sc, b, b.gen, scheme, gains, opt.jobs);
      write_file(opt, std::string("mc_") + scheme_name(scheme) + ".csv",
                 mc_csv(sc.seeds, reports));
      AggregateReport agg = aggregate(reports);
      summary["schemes"][scheme_name(scheme)] = aggregate_to_json(agg);
      log_of(opt) << "montecarlo " << scheme_name(scheme) << ": n=" << agg.n_runs
                  << " gamma_est mean=" << agg.gamma_est.mean << " max=" << agg.gamma_est.max
                  << " completion=" << agg.completion_rate << "\n";
    }
    write_file(opt, "mc_summary.json", dump(summary));
    return kExitOk;
  });
}

int cmd_sweep_beta(const Scenario& sc, const CommandOptions& opt) {
  return guarded(opt, [&]() -> int {
    sc.validate();
    if (sc.beta_grid.empty())
      throw ValidationError("sweep_beta: scenario beta_grid must be nonempty");
    Bench b = make_bench(sc);
    SynthOptions so = synth_options(sc, opt);

    struct Row {
      double beta = 0.0;
      bool feasible = false;
      double gamma0 = std::numeric_limits<double>::quiet_NaN();
      double gamma_cert = std::numeric_limits<double>::quiet_NaN();
      bool cert_pass = false;
      std::optional<AggregateReport> agg;
      std::string message;
    };
    std::vector<Row> rows;

    // beta = 0 is the nominal design: the baseline the effort weighting is
    // traded against.
    auto run_row = [&](double beta, Scheme scheme) {
      Row row;
      row.beta = beta;
      try {
        SynthesisResult res = scheme == Scheme::mic_shared
                                  ? synthesize_mic(b.sys, b.gen, beta, so)
                                  : synthesize_nominal(b.sys, b.gen, so);
        row.feasible = true;
        row.gamma0 = res.gains.gamma0;
        row.gamma_cert = res.gains.gamma_cert;
        CertReport rep = certify_dissipation(b.sys, b.gen, res.gains, res.gains.beta);
        row.cert_pass = rep.pass;
        row.agg = aggregate(monte_carlo(sc, b, b.gen, scheme, &res.gains, opt.jobs));
        log_of(opt) << "sweep_beta beta=" << beta << ": gamma0=" << row.gamma0
                    << " r_int mean=" << row.agg->r_int.mean << "\n";
      } catch (const InfeasibleError& e) {
        row.message = e.what();
        log_of(opt) << "sweep_beta beta=" << beta << ": infeasible (" << e.what() << ")\n";
      }
      rows.push_back(std::move(row));
    };

    run_row(0.0, Scheme::nominal_shared);
    for (double beta : sc.beta_grid) run_row(beta, Scheme::mic_shared);

    std::string csv =
        "beta,feasible,gamma0,gamma_cert,cert_pass,gamma_est_mean,r_int_mean,rms_aE_mean,"
        "rms_aF_mean,t_LC_mean,completion_rate,collision_rate\n";
    json jrows = json::array();
    bool any_feasible = false;
    for (const Row& row : rows) {
      any_feasible = any_feasible || row.feasible;
      csv += num(row.beta) + "," + (row.feasible ? "1" : "0") + "," + num(row.gamma0) + "," +
             num(row.gamma_cert) + "," + (row.cert_pass ? "1" : "0") + ",";
      if (row.agg) {
        const AggregateReport& a = *row.agg;
        csv += num(a.gamma_est.mean) + "," + num(a.r_int.mean) + "," + num(a.rms_aE.mean) + "," +
               num(a.rms_aF.mean) + "," + (a.n_completed > 0 ? num(a.t_LC.mean) : std::string()) +
               "," + num(a.completion_rate) + "," + num(a.collision_rate);
      } else {
        csv += ",,,,,,";
      }
      csv += "\n";
      json jr = {{"beta", row.beta},
                 {"feasible", row.feasible},
                 {"cert_pass", row.cert_pass},
                 {"message", row.message}};
      if (row.feasible) {
        jr["gamma0"] = row.gamma0;
        jr["gamma_cert"] = row.gamma_cert;
      }
      if (row.agg) jr["aggregate"] = aggregate_to_json(*row.agg);
      jrows.push_back(jr);
    }
    json summary;
    summary["meta"] = meta_block(sc, "sweep_beta");
    summary["rows"] = jrows;
    write_file(opt, "sweep_beta.csv", csv);
    write_file(opt, "sweep_beta.json", dump(summary));
    return any_feasible ? kExitOk : kExitInfeasible;
  });
}

int cmd_sweep_obs(const Scenario& sc, const CommandOptions& opt) {
  return guarded(opt, [&]() -> int {
    sc.validate();
    if (sc.alpha_grid.empty() || sc.q_grid.empty())
      throw ValidationError("sweep_obs: scenario alpha_grid and q_grid must be nonempty");
    Bench b = make_bench(sc);
    SynthOptions so = synth_options(sc, opt);
    Scheme scheme = sc.primary_scheme();

    std::string csv =
        "alpha,q,feasible,gamma0,gamma_cert,cert_pass,accuracy_mean,follow_delay_mean,"
        "gamma_est_mean,completion_rate\n";
    json jrows = json::array();
    bool any_feasible = false;
    for (double alpha : sc.alpha_grid) {
      for (double q : sc.q_grid) {
        ObsParams obs{alpha, q};
        JointGenerator gen_aq = build_joint_generator(sc.rates, obs);
        json jr = {{"alpha", alpha}, {"q", q}, {"feasible", false}, {"cert_pass", false}};
        csv += num(alpha) + "," + num(q) + ",";
        try {
          SynthesisResult res = scheme == Scheme::mic_shared
                                    ? synthesize_mic(b.sys, gen_aq, sc.beta, so)
                                    : synthesize_nominal(b.sys, gen_aq, so);
          CertReport rep = certify_dissipation(b.sys, gen_aq, res.gains, res.gains.beta);
          Scenario sc_aq = sc;
          sc_aq.obs = obs;
          const ControllerGains* gains = scheme_uses_gains(scheme) ? &res.gains : nullptr;
          AggregateReport agg =
              aggregate(monte_carlo(sc_aq, b, gen_aq, scheme, gains, opt.jobs));
          any_feasible = true;
          jr["feasible"] = true;
          jr["gamma0"] = res.gains.gamma0;
          jr["gamma_cert"] = res.gains.gamma_cert;
          jr["cert_pass"] = rep.pass;
          jr["aggregate"] = aggregate_to_json(agg);
          csv += "1," + num(res.gains.gamma0) + "," + num(res.gains.gamma_cert) + "," +
                 (rep.pass ? "1" : "0") + "," + num(agg.obs_accuracy.mean) + "," +
                 num(agg.follow_delay.mean) + "," + num(agg.gamma_est.mean) + "," +
                 num(agg.completion_rate);
          log_of(opt) << "sweep_obs alpha=" << alpha << " q=" << q
                      << ": accuracy=" << agg.obs_accuracy.mean
                      << " delay=" << agg.follow_delay.mean << " gamma0=" << res.gains.gamma0
                      << "\n";
        } catch (const InfeasibleError& e) {
          jr["message"] = e.what();
          csv += "0,,,0,,,,";
          log_of(opt) << "sweep_obs alpha=" << alpha << " q=" << q << ": infeasible ("
                      << e.what() << ")\n";
        }
        csv += "\n";
        jrows.push_back(jr);
      }
    }
    json summary;
    summary["meta"] = meta_block(sc, "sweep_obs");
    summary["rows"] = jrows;
    write_file(opt, "sweep_obs.csv", csv);
    write_file(opt, "sweep_obs.json", dump(summary));
    return any_feasible ? kExitOk : kExitInfeasible;
  });
}

int cmd_replay(const Scenario& sc, const CommandOptions& opt) {
  return guarded(opt, [&]() -> int {
    sc.validate();
    if (sc.event_file.empty())
      throw ValidationError("replay: scenario has no event_file");
    std::vector<VehicleTrack> tracks = ingest_file(resolve_path(sc, sc.event_file));
    std::vector<std::string> skipped;
    std::vector<LaneChangeEvent> events = extract_events(tracks, sc.event_opts, &skipped);
    if (events.empty()) {
      std::string msg = "replay: no usable lane-change event in '" + sc.event_file + "'";
      for (const std::string& s : skipped) msg += "; " + s;
      throw ValidationError(msg);
    }
    const LaneChangeEvent& e = events.front();

    std::vector<double> times = e.t;
    const double t0 = times.front();
    for (double& t : times) t -= t0;
    LeaderProfile prof = LeaderProfile::replay(times, e.v_L);

    Bench b = make_bench(sc);
    GainsCache cache(b, sc, synth_options(sc, opt));

    json report;
    report["meta"] = meta_block(sc, "replay");
    report["event"] = {{"ego_id", e.ego_id},
                       {"leader_id", e.leader_id},
                       {"follower_id", e.follower_id},
                       {"t_cross", e.t_cross},
                       {"front_gap_at_cross", e.front_gap_at_cross},
                       {"rear_gap_at_cross", e.rear_gap_at_cross},
                       {"duration", times.back()}};
    report["schemes"] = json::object();

    for (Scheme scheme : sc.schemes) {
      SimConfig cfg = base_config(sc, b, scheme);
      // Replay analyses drive the hidden mode from the live TD indicator with
      // the conditional observer; the event supplies the initial conditions.
      cfg.mode_source = ModeSource::td;
      cfg.horizon = times.back();
      cfg.x0 = PlantState{e.v_E.front(), e.s_EL.front(), e.v_F.front(), e.s_FE.front()};
      cfg.seed = sc.seeds.front();
      SimResult r = run(cfg, b.sys, cache.for_scheme(scheme), sc.driver, sc.follower, b.gen,
                        prof, sc.criterion);
      MetricReport m = metric_report(r, sc.v_star, sc.follower);
      write_file(opt, std::string("replay_") + scheme_name(scheme) + ".csv", result_to_csv(r));
      report["schemes"][scheme_name(scheme)] = report_to_json(m);
      log_of(opt) << "replay " << scheme_name(scheme) << ": t_LC="
                  << (m.t_LC ? num(*m.t_LC) : std::string("none"))
                  << " gamma_est=" << m.gamma_est << " r_int=" << m.r_int
                  << " rms_aE=" << m.rms_aE << "\n";
    }
    write_file(opt, "replay_report.json", dump(report));
    return kExitOk;
  });
}

int cmd_calibrate(const Scenario& sc, const CommandOptions& opt) {
  return guarded(opt, [&]() -> int {
    sc.validate();
    if (sc.data_file.empty())
      throw ValidationError("calibrate: scenario has no data_file");
    std::vector<VehicleTrack> tracks = ingest_file(resolve_path(sc, sc.data_file));
    std::vector<std::string> skipped;
    std::vector<LaneChangeEvent> events = extract_events(tracks, sc.event_opts, &skipped);
    if (events.empty()) {
      std::string msg = "calibrate: no lane-change events in '" + sc.data_file + "'";
      for (const std::string& s : skipped) msg += "; " + s;
      throw ValidationError(msg);
    }
    CalibOptions copts;
    copts.fit.jobs = opt.jobs;
    CalibrationResult result = calibrate(events, copts);
    json j = calibration_to_json(result);
    j["meta"] = meta_block(sc, "calibrate");
    j["n_events"] = events.size();
    write_file(opt, "calibration.json", dump(j));
    log_of(opt) << "calibrate: events=" << events.size()
                << " driver_residual=" << result.driver_residual
                << " follower_residual=" << result.follower_residual
                << " converged=" << (result.driver_converged && result.follower_converged)
                << "\n";
    return kExitOk;
  });
}

}  // namespace lcshare
