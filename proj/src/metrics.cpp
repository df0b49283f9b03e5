#include "lcshare/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lcshare/errors.hpp"
#include "lcshare/matjson.hpp"

namespace lcshare {

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) throw ValidationError("trapezoid: mismatched series lengths");
  if (t.size() < 2) throw ValidationError("trapezoid: need at least two samples");
  double acc = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i)
    acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  return acc;
}

double l2_norm(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) throw ValidationError("l2_norm: mismatched series lengths");
  if (t.size() < 2) throw ValidationError("l2_norm: need at least two samples");
  double acc = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    double a = y[i - 1] * y[i - 1];
    double b = y[i] * y[i];
    acc += 0.5 * (t[i] - t[i - 1]) * (a + b);
  }
  return std::sqrt(acc);
}

namespace {

std::vector<double> shifted(const std::vector<double>& v, double ref) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - ref;
  return out;
}

}  // namespace

double empirical_gain(const SimResult& result, double v_star) {
  double denom = l2_norm(result.t, shifted(result.v_L, v_star));
  if (!(denom > 0.0))
    throw ValidationError("empirical_gain: zero leader disturbance, gain undefined");
  return l2_norm(result.t, shifted(result.v_F, v_star)) / denom;
}

double intervention_ratio(const SimResult& result) {
  double e_av = l2_norm(result.t, result.u_AV);
  double e_h = l2_norm(result.t, result.u_H);
  if (!(e_av + e_h > 0.0))
    throw ValidationError("intervention_ratio: no input energy, ratio undefined");
  return e_av / (e_av + e_h);
}

double rms_accel(const std::vector<double>& a, double T) {
  if (!(T > 0.0)) throw ValidationError("rms_accel: horizon must be positive");
  if (a.size() < 2) throw ValidationError("rms_accel: need at least two samples");
  double dt = T / static_cast<double>(a.size() - 1);
  double acc = 0.0;
  for (std::size_t i = 1; i < a.size(); ++i)
    acc += 0.5 * dt * (a[i - 1] * a[i - 1] + a[i] * a[i]);
  return std::sqrt(acc / T);
}

std::vector<double> follower_accel_series(const SimResult& result, const FollowerModel& follower) {
  std::vector<double> a(result.t.size());
  for (std::size_t i = 0; i < result.t.size(); ++i)
    a[i] = follower_accel(follower, result.v_F[i], result.s_FE[i], result.s_EL[i], result.v_E[i],
                          result.v_L[i]);
  return a;
}

std::pair<double, double> observation_quality(const SimResult& result) {
  const std::size_t n = result.eta.size();
  if (n == 0 || result.eta_hat.size() != n)
    throw ValidationError("observation_quality: mode series missing");
  std::size_t matches = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (result.eta[i] == result.eta_hat[i]) ++matches;
  double accuracy = static_cast<double>(matches) / static_cast<double>(n);

  std::vector<double> lags;
  for (std::size_t i = 1; i < n; ++i) {
    if (result.eta[i] == result.eta[i - 1]) continue;
    double lag = kFollowDelayCap;
    for (std::size_t j = i; j < n && result.eta[j] == result.eta[i]; ++j) {
      if (result.eta_hat[j] == result.eta[i]) {
        lag = std::min(result.t[j] - result.t[i], kFollowDelayCap);
        break;
      }
    }
    lags.push_back(lag);
  }
  double delay = 0.0;
  for (double lag : lags) delay += lag;
  if (!lags.empty()) delay /= static_cast<double>(lags.size());
  return {accuracy, delay};
}

MetricReport metric_report(const SimResult& result, double v_star, const FollowerModel& follower) {
  MetricReport r;
  r.gamma_est = empirical_gain(result, v_star);
  r.E_AV = l2_norm(result.t, result.u_AV);
  r.E_H = l2_norm(result.t, result.u_H);
  r.r_int = (r.E_AV + r.E_H > 0.0) ? r.E_AV / (r.E_AV + r.E_H) : 0.0;
  double T = result.t.back() - result.t.front();
  r.rms_aE = rms_accel(result.u, T);
  r.rms_aF = rms_accel(follower_accel_series(result, follower), T);
  r.t_LC = result.t_LC;
  auto [acc, delay] = observation_quality(result);
  r.obs_accuracy = acc;
  r.follow_delay = delay;
  r.collision = result.collision;
  return r;
}

Stats compute_stats(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("compute_stats: empty value set");
  Stats s;
  s.max = -std::numeric_limits<double>::infinity();
  s.min = std::numeric_limits<double>::infinity();
  for (double v : values) {
    s.mean += v;
    s.max = std::max(s.max, v);
    s.min = std::min(s.min, v);
  }
  s.mean /= static_cast<double>(values.size());
  for (double v : values) s.variance += (v - s.mean) * (v - s.mean);
  s.variance /= static_cast<double>(values.size());
  return s;
}

AggregateReport aggregate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw ValidationError("aggregate: empty report set");
  AggregateReport a;
  a.n_runs = reports.size();
  std::vector<double> g, ri, eav, eh, ae, af, oa, fd, tlc;
  std::size_t collisions = 0;
  for (const auto& r : reports) {
    g.push_back(r.gamma_est);
    ri.push_back(r.r_int);
    eav.push_back(r.E_AV);
    eh.push_back(r.E_H);
    ae.push_back(r.rms_aE);
    af.push_back(r.rms_aF);
    oa.push_back(r.obs_accuracy);
    fd.push_back(r.follow_delay);
    if (r.t_LC.has_value()) tlc.push_back(*r.t_LC);
    if (r.collision) ++collisions;
  }
  a.n_completed = tlc.size();
  a.completion_rate = static_cast<double>(a.n_completed) / static_cast<double>(a.n_runs);
  a.collision_rate = static_cast<double>(collisions) / static_cast<double>(a.n_runs);
  a.gamma_est = compute_stats(g);
  a.r_int = compute_stats(ri);
  a.E_AV = compute_stats(eav);
  a.E_H = compute_stats(eh);
  a.rms_aE = compute_stats(ae);
  a.rms_aF = compute_stats(af);
  a.obs_accuracy = compute_stats(oa);
  a.follow_delay = compute_stats(fd);
  if (!tlc.empty()) a.t_LC = compute_stats(tlc);
  return a;
}

json report_to_json(const MetricReport& r) {
  json j;
  j["gamma_est"] = r.gamma_est;
  j["r_int"] = r.r_int;
  j["E_AV"] = r.E_AV;
  j["E_H"] = r.E_H;
  j["rms_aE"] = r.rms_aE;
  j["rms_aF"] = r.rms_aF;
  if (r.t_LC.has_value())
    j["t_LC"] = *r.t_LC;
  else
    j["t_LC"] = nullptr;
  j["obs_accuracy"] = r.obs_accuracy;
  j["follow_delay"] = r.follow_delay;
  j["collision"] = r.collision;
  return j;
}

json stats_to_json(const Stats& s) {
  return json{{"mean", s.mean}, {"max", s.max}, {"min", s.min}, {"variance", s.variance}};
}

json aggregate_to_json(const AggregateReport& a) {
  json j;
  j["n_runs"] = a.n_runs;
  j["n_completed"] = a.n_completed;
  j["completion_rate"] = a.completion_rate;
  j["collision_rate"] = a.collision_rate;
  j["gamma_est"] = stats_to_json(a.gamma_est);
  j["r_int"] = stats_to_json(a.r_int);
  j["E_AV"] = stats_to_json(a.E_AV);
  j["E_H"] = stats_to_json(a.E_H);
  j["rms_aE"] = stats_to_json(a.rms_aE);
  j["rms_aF"] = stats_to_json(a.rms_aF);
  j["obs_accuracy"] = stats_to_json(a.obs_accuracy);
  j["follow_delay"] = stats_to_json(a.follow_delay);
  j["t_LC"] = stats_to_json(a.t_LC);
  return j;
}

}  // namespace lcshare
