#include "lcshare/calib.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lcshare/errors.hpp"
#include "lcshare/matjson.hpp"
#include "lcshare/parallel.hpp"
#include "lcshare/rng.hpp"

namespace lcshare {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

double parse_num(const std::string& s, std::size_t line_no, const char* field) {
  try {
    std::size_t idx = 0;
    double v = std::stod(s, &idx);
    if (idx != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("line " + std::to_string(line_no) + ": malformed " + field + " value '" +
                          s + "'");
  }
}

long parse_long(const std::string& s, std::size_t line_no, const char* field) {
  try {
    std::size_t idx = 0;
    long v = std::stol(s, &idx);
    if (idx != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("line " + std::to_string(line_no) + ": malformed " + field + " value '" +
                          s + "'");
  }
}

double median(std::vector<double> v) {
  std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1,
                     v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

// Clamped linear interpolation on a sorted grid.
double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  std::size_t lo = hi - 1;
  double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

}  // namespace

double VehicleTrack::dt() const {
  if (t.size() < 2) throw ValidationError("vehicle track needs >= 2 samples for a sampling period");
  return t[1] - t[0];
}

void VehicleTrack::validate() const {
  std::string who = "vehicle " + std::to_string(id);
  if (t.size() < 2) throw ValidationError(who + ": needs >= 2 samples");
  if (x.size() != t.size() || v.size() != t.size() || lane.size() != t.size() ||
      (!a.empty() && a.size() != t.size()))
    throw ValidationError(who + ": column lengths disagree");
  double d0 = t[1] - t[0];
  for (std::size_t i = 1; i < t.size(); ++i) {
    double d = t[i] - t[i - 1];
    if (!(d > 0.0)) throw ValidationError(who + ": non-monotone time");
    if (std::fabs(d - d0) > 1e-6) throw ValidationError(who + ": non-uniform sampling period");
  }
  std::vector<double> dev;
  dev.reserve(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i)
    dev.push_back(std::fabs(0.5 * (v[i] + v[i - 1]) - (x[i] - x[i - 1]) / (t[i] - t[i - 1])));
  double md = median(std::move(dev));
  if (md > 0.5)
    throw ValidationError(who + ": speed/position unit mismatch (median |v - dx/dt| = " +
                          std::to_string(md) + " m/s)");
}

std::vector<VehicleTrack> ingest(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("line 1: missing header");
  std::vector<std::string> header = split_fields(line);
  bool has_a = false;
  const std::vector<std::string> base{"t", "vehicle_id", "lane_id", "x", "v"};
  if (header.size() == 6 && std::equal(base.begin(), base.end(), header.begin()) &&
      header[5] == "a")
    has_a = true;
  else if (!(header.size() == 5 && std::equal(base.begin(), base.end(), header.begin())))
    throw ValidationError("line 1: header must be t,vehicle_id,lane_id,x,v[,a]");

  struct Row {
    double t, x, v, a;
    int lane;
  };
  std::map<long, std::vector<Row>> grouped;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_fields(line);
    if (f.size() != header.size())
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(f.size()));
    Row r;
    r.t = parse_num(f[0], line_no, "t");
    long vid = parse_long(f[1], line_no, "vehicle_id");
    r.lane = static_cast<int>(parse_long(f[2], line_no, "lane_id"));
    r.x = parse_num(f[3], line_no, "x");
    r.v = parse_num(f[4], line_no, "v");
    r.a = has_a ? parse_num(f[5], line_no, "a") : 0.0;
    grouped[vid].push_back(r);
  }

  std::vector<VehicleTrack> tracks;
  tracks.reserve(grouped.size());
  for (auto& [vid, rows] : grouped) {
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    VehicleTrack tr;
    tr.id = vid;
    tr.t.reserve(rows.size());
    for (const Row& r : rows) {
      tr.t.push_back(r.t);
      tr.x.push_back(r.x);
      tr.v.push_back(r.v);
      tr.lane.push_back(r.lane);
      if (has_a) tr.a.push_back(r.a);
    }
    tr.validate();
    tracks.push_back(std::move(tr));
  }
  return tracks;
}

std::vector<VehicleTrack> ingest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trajectory file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ingest(buf.str());
}

std::vector<LaneChangeEvent> extract_events(const std::vector<VehicleTrack>& tracks,
                                            const EventOptions& opts,
                                            std::vector<std::string>* skipped) {
  auto skip = [&](const std::string& why) {
    if (skipped) skipped->push_back(why);
  };
  // Id order makes the result independent of the input arrangement.
  std::vector<const VehicleTrack*> order;
  order.reserve(tracks.size());
  for (const auto& tr : tracks) order.push_back(&tr);
  std::sort(order.begin(), order.end(),
            [](const VehicleTrack* a, const VehicleTrack* b) { return a->id < b->id; });

  std::vector<LaneChangeEvent> events;
  for (const VehicleTrack* ego : order) {
    for (std::size_t i = 1; i < ego->t.size(); ++i) {
      if (ego->lane[i] == ego->lane[i - 1]) continue;
      double t_cross = ego->t[i];
      int target = ego->lane[i];
      std::string tag = "ego " + std::to_string(ego->id) + " @ t=" + std::to_string(t_cross);
      double x_e = interp(ego->t, ego->x, t_cross);

      const VehicleTrack* lead = nullptr;
      const VehicleTrack* foll = nullptr;
      double best_front = 0.0, best_rear = 0.0;
      for (const VehicleTrack* other : order) {
        if (other == ego) continue;
        if (t_cross < other->t.front() || t_cross > other->t.back()) continue;
        // Lane at the crossing: the sample in force (floor convention).
        auto it = std::upper_bound(other->t.begin(), other->t.end(), t_cross);
        std::size_t j = static_cast<std::size_t>(it - other->t.begin());
        if (j > 0) --j;
        if (other->lane[j] != target) continue;
        double x_o = interp(other->t, other->x, t_cross);
        if (x_o > x_e) {
          double gap = x_o - x_e;
          if (!lead || gap < best_front - 1e-9 ||
              (std::fabs(gap - best_front) <= 1e-9 && other->id > lead->id)) {
            lead = other;
            best_front = gap;
          }
        } else if (x_o < x_e) {
          double gap = x_e - x_o;
          if (!foll || gap < best_rear - 1e-9 ||
              (std::fabs(gap - best_rear) <= 1e-9 && other->id > foll->id)) {
            foll = other;
            best_rear = gap;
          }
        }
      }
      if (!lead) {
        skip(tag + ": no leader in target lane");
        continue;
      }
      if (!foll) {
        skip(tag + ": no follower in target lane");
        continue;
      }

      double t0 = std::max({t_cross - opts.window, ego->t.front(), lead->t.front(),
                            foll->t.front()});
      double t1 = std::min({t_cross + opts.window, ego->t.back(), lead->t.back(),
                            foll->t.back()});
      LaneChangeEvent ev;
      ev.ego_id = ego->id;
      ev.leader_id = lead->id;
      ev.follower_id = foll->id;
      ev.target_lane = target;
      ev.t0 = t0;
      ev.t1 = t1;
      ev.t_cross = t_cross;
      for (std::size_t k = 0; k < ego->t.size(); ++k) {
        double tk = ego->t[k];
        if (tk < t0 - 1e-9 || tk > t1 + 1e-9) continue;
        ev.t.push_back(tk);
        ev.v_E.push_back(ego->v[k]);
        ev.s_EL.push_back(interp(lead->t, lead->x, tk) - ego->x[k] - opts.vehicle_length);
        ev.v_L.push_back(interp(lead->t, lead->v, tk));
        ev.v_F.push_back(interp(foll->t, foll->v, tk));
        ev.s_FE.push_back(ego->x[k] - interp(foll->t, foll->x, tk) - opts.vehicle_length);
        if (!ego->a.empty()) ev.a_E.push_back(ego->a[k]);
      }
      if (ev.t.size() < 3) {
        skip(tag + ": window too short");
        continue;
      }
      if (*std::min_element(ev.s_EL.begin(), ev.s_EL.end()) <= 0.0) {
        skip(tag + ": nonpositive ego-leader gap in window");
        continue;
      }
      if (ev.a_E.empty()) {
        std::size_t n = ev.t.size();
        ev.a_E.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
          std::size_t lo = k > 0 ? k - 1 : 0;
          std::size_t hi = k + 1 < n ? k + 1 : n - 1;
          ev.a_E[k] = (ev.v_E[hi] - ev.v_E[lo]) / (ev.t[hi] - ev.t[lo]);
        }
      }
      ev.front_gap_at_cross = interp(ev.t, ev.s_EL, t_cross);
      ev.rear_gap_at_cross = interp(ev.t, ev.s_FE, t_cross);
      events.push_back(std::move(ev));
    }
  }
  return events;
}

namespace {

// ---------------------------------------------------------------------------
// Derivative-free simplex minimization (Nelder-Mead) with box projection.

struct NmOut {
  Eigen::VectorXd x;
  double f = 0.0;
  bool converged = false;
};

NmOut nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                  const Eigen::VectorXd& x0, const Eigen::VectorXd& steps, int max_iters,
                  double tol) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n) + 1, x0);
  for (int j = 0; j < n; ++j) xs[static_cast<std::size_t>(j) + 1](j) += steps(j);
  std::vector<double> fs(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) fs[k] = f(xs[k]);

  auto order = [&] {
    std::vector<std::size_t> idx(xs.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    std::vector<Eigen::VectorXd> nx(xs.size());
    std::vector<double> nf(xs.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      nx[k] = xs[idx[k]];
      nf[k] = fs[idx[k]];
    }
    xs.swap(nx);
    fs.swap(nf);
  };

  NmOut out;
  for (int iter = 0; iter < max_iters; ++iter) {
    order();
    if (fs.back() - fs.front() <= tol * (1.0 + std::fabs(fs.front()))) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) centroid += xs[k];
    centroid /= static_cast<double>(n);

    Eigen::VectorXd xr = centroid + (centroid - xs.back());
    double fr = f(xr);
    if (fr < fs.front()) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs.back());
      double fe = f(xe);
      if (fe < fr) {
        xs.back() = xe;
        fs.back() = fe;
      } else {
        xs.back() = xr;
        fs.back() = fr;
      }
      continue;
    }
    if (fr < fs[fs.size() - 2]) {
      xs.back() = xr;
      fs.back() = fr;
      continue;
    }
    Eigen::VectorXd xc = fr < fs.back() ? centroid + 0.5 * (xr - centroid)
                                        : centroid + 0.5 * (xs.back() - centroid);
    double fc = f(xc);
    if (fc < std::min(fr, fs.back())) {
      xs.back() = xc;
      fs.back() = fc;
      continue;
    }
    for (std::size_t k = 1; k < xs.size(); ++k) {  // shrink toward the best vertex
      xs[k] = xs.front() + 0.5 * (xs[k] - xs.front());
      fs[k] = f(xs[k]);
    }
  }
  order();
  out.x = xs.front();
  out.f = fs.front();
  return out;
}

Eigen::VectorXd project_box(Eigen::VectorXd x, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi) {
  for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = std::min(std::max(x(j), lo(j)), hi(j));
  return x;
}

// Curve coordinates sit in the last three slots of both parameterizations;
// keep the ramp interval nondegenerate after clamping.
void repair_curve_tail(Eigen::VectorXd& x) {
  Eigen::Index n = x.size();
  if (x(n - 1) < x(n - 2) + 0.5) x(n - 1) = x(n - 2) + 0.5;
}

struct RestartPlan {
  Eigen::VectorXd x0;
  Eigen::VectorXd steps;
};

std::vector<RestartPlan> make_restarts(const Eigen::VectorXd& guess, const Eigen::VectorXd& lo,
                                       const Eigen::VectorXd& hi, const FitOptions& opts) {
  std::vector<RestartPlan> plans;
  Eigen::VectorXd range = hi - lo;
  Eigen::VectorXd steps(range.size());
  for (Eigen::Index j = 0; j < range.size(); ++j)
    steps(j) = std::max(0.08 * range(j), 1e-3);
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    Eigen::VectorXd x0 = guess;
    if (r > 0) {
      Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(r)));
      for (Eigen::Index j = 0; j < x0.size(); ++j)
        x0(j) += range(j) * rng.uniform(-0.3, 0.3);
    }
    x0 = project_box(std::move(x0), lo, hi);
    repair_curve_tail(x0);
    plans.push_back({std::move(x0), steps});
  }
  return plans;
}

NmOut fit_restarted(const std::function<double(const Eigen::VectorXd&)>& objective,
                    const Eigen::VectorXd& guess, const Eigen::VectorXd& lo,
                    const Eigen::VectorXd& hi, const FitOptions& opts) {
  if (lo.size() != guess.size() || hi.size() != guess.size())
    throw ValidationError("fit: bound dimensions disagree with the guess");
  for (Eigen::Index j = 0; j < lo.size(); ++j)
    if (!(hi(j) >= lo(j))) throw ValidationError("fit: upper bound below lower bound");
  std::vector<RestartPlan> plans = make_restarts(guess, lo, hi, opts);
  std::vector<NmOut> outs(plans.size());
  parallel_for(plans.size(), opts.jobs, [&](std::size_t r) {
    outs[r] = nelder_mead(objective, plans[r].x0, plans[r].steps, opts.max_iters, opts.tol);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < outs.size(); ++r)
    if (outs[r].f < outs[best].f) best = r;
  return outs[best];
}

// ---------------------------------------------------------------------------
// Forward-simulation residuals. Data series are interpolated linearly at the
// integrator stage times; the mode label is held over each sample interval.

double driver_event_sse(const LaneChangeEvent& e, const std::vector<int>& labels,
                        const DriverModel& m) {
  double sse = 0.0;
  double ve = e.v_E.front(), sel = e.s_EL.front();
  for (std::size_t i = 0; i < e.t.size(); ++i) {
    if (!std::isfinite(ve) || !std::isfinite(sel)) return 1e12;
    double r = ve - e.v_E[i];
    sse += r * r;
    if (sel <= 0.0) return sse + 1e6;  // collapsed gap: hard penalty
    if (i + 1 == e.t.size()) break;
    double h = e.t[i + 1] - e.t[i];
    int mode = labels[i];
    double vl0 = e.v_L[i], vl1 = e.v_L[i + 1], vlm = 0.5 * (vl0 + vl1);
    auto fv = [&](double vv, double ss, double vl) { return human_accel(m, mode, vv, ss, vl); };
    double k1v = fv(ve, sel, vl0), k1s = vl0 - ve;
    double k2v = fv(ve + 0.5 * h * k1v, sel + 0.5 * h * k1s, vlm);
    double k2s = vlm - (ve + 0.5 * h * k1v);
    double k3v = fv(ve + 0.5 * h * k2v, sel + 0.5 * h * k2s, vlm);
    double k3s = vlm - (ve + 0.5 * h * k2v);
    double k4v = fv(ve + h * k3v, sel + h * k3s, vl1);
    double k4s = vl1 - (ve + h * k3v);
    ve += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    sel += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
  }
  return sse;
}

double follower_event_sse(const LaneChangeEvent& e, const FollowerModel& m) {
  double sse = 0.0;
  double vf = e.v_F.front(), sfe = e.s_FE.front();
  for (std::size_t i = 0; i < e.t.size(); ++i) {
    if (!std::isfinite(vf) || !std::isfinite(sfe)) return 1e12;
    double r = vf - e.v_F[i];
    sse += r * r;
    if (i + 1 == e.t.size()) break;
    double h = e.t[i + 1] - e.t[i];
    auto at = [&](const std::vector<double>& ys, double frac) {
      return ys[i] + frac * (ys[i + 1] - ys[i]);
    };
    auto fv = [&](double vv, double ss, double frac) {
      return follower_accel(m, vv, ss, at(e.s_EL, frac), at(e.v_E, frac), at(e.v_L, frac));
    };
    double ve0 = e.v_E[i], vem = at(e.v_E, 0.5), ve1 = e.v_E[i + 1];
    double k1v = fv(vf, sfe, 0.0), k1s = ve0 - vf;
    double k2v = fv(vf + 0.5 * h * k1v, sfe + 0.5 * h * k1s, 0.5);
    double k2s = vem - (vf + 0.5 * h * k1v);
    double k3v = fv(vf + 0.5 * h * k2v, sfe + 0.5 * h * k2s, 0.5);
    double k3s = vem - (vf + 0.5 * h * k2v);
    double k4v = fv(vf + h * k3v, sfe + h * k3s, 1.0);
    double k4s = ve1 - (vf + h * k3v);
    vf += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    sfe += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
  }
  return sse;
}

DriverModel unpack_driver(const Eigen::VectorXd& x) {
  return DriverModel{x(0), x(1), x(2), x(3), {x(4), x(5), x(6)}};
}

FollowerModel unpack_follower(const Eigen::VectorXd& x) {
  return FollowerModel{x(0), x(1), {x(2), x(3), x(4)}};
}

Eigen::VectorXd pack_driver(const DriverModel& m) {
  Eigen::VectorXd x(7);
  x << m.a1, m.b1, m.a2, m.b2, m.curve.v_max, m.curve.s_st, m.curve.s_go;
  return x;
}

Eigen::VectorXd pack_follower(const FollowerModel& m) {
  Eigen::VectorXd x(5);
  x << m.a, m.b, m.curve.v_max, m.curve.s_st, m.curve.s_go;
  return x;
}

void check_events_nonempty(const std::vector<LaneChangeEvent>& events, const char* what) {
  if (events.empty()) throw ValidationError(std::string(what) + ": no events to fit");
  for (const auto& e : events)
    if (e.t.size() < 2) throw ValidationError(std::string(what) + ": event window too short");
}

}  // namespace

std::pair<DriverModel, FitDiag> fit_driver(const std::vector<LaneChangeEvent>& events,
                                           const std::vector<std::vector<int>>& labels,
                                           const DriverModel& guess, const DriverModel& lo,
                                           const DriverModel& hi, const FitOptions& opts) {
  check_events_nonempty(events, "fit_driver");
  if (labels.size() != events.size())
    throw ValidationError("fit_driver: one label series per event required");
  for (std::size_t e = 0; e < events.size(); ++e)
    if (labels[e].size() != events[e].t.size())
      throw ValidationError("fit_driver: label series length mismatch");
  Eigen::VectorXd vlo = pack_driver(lo), vhi = pack_driver(hi);
  auto objective = [&](const Eigen::VectorXd& raw) {
    Eigen::VectorXd x = project_box(raw, vlo, vhi);
    repair_curve_tail(x);
    DriverModel m = unpack_driver(x);
    double sse = 0.0;
    for (std::size_t e = 0; e < events.size(); ++e)
      sse += driver_event_sse(events[e], labels[e], m);
    return sse;
  };
  NmOut best = fit_restarted(objective, pack_driver(guess), vlo, vhi, opts);
  Eigen::VectorXd x = project_box(best.x, vlo, vhi);
  repair_curve_tail(x);
  DriverModel m = unpack_driver(x);
  m.validate();
  return {m, FitDiag{best.f, best.converged}};
}

std::pair<FollowerModel, FitDiag> fit_follower(const std::vector<LaneChangeEvent>& events,
                                               const FollowerModel& guess,
                                               const FollowerModel& lo, const FollowerModel& hi,
                                               const FitOptions& opts) {
  check_events_nonempty(events, "fit_follower");
  Eigen::VectorXd vlo = pack_follower(lo), vhi = pack_follower(hi);
  auto objective = [&](const Eigen::VectorXd& raw) {
    Eigen::VectorXd x = project_box(raw, vlo, vhi);
    repair_curve_tail(x);
    FollowerModel m = unpack_follower(x);
    double sse = 0.0;
    for (const auto& e : events) sse += follower_event_sse(e, m);
    return sse;
  };
  NmOut best = fit_restarted(objective, pack_follower(guess), vlo, vhi, opts);
  Eigen::VectorXd x = project_box(best.x, vlo, vhi);
  repair_curve_tail(x);
  FollowerModel m = unpack_follower(x);
  m.validate();
  return {m, FitDiag{best.f, best.converged}};
}

namespace {

// Two-regressor least squares of a ~ c1 r1 + c2 r2; returns the residual SSE.
double regression_sse(const std::vector<double>& r1, const std::vector<double>& r2,
                      const std::vector<double>& y) {
  double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0, syy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s11 += r1[i] * r1[i];
    s12 += r1[i] * r2[i];
    s22 += r2[i] * r2[i];
    b1 += r1[i] * y[i];
    b2 += r2[i] * y[i];
    syy += y[i] * y[i];
  }
  double det = s11 * s22 - s12 * s12;
  if (det <= 1e-12 * std::max({s11, s22, 1.0})) return syy;  // degenerate: nothing explained
  double c1 = (s22 * b1 - s12 * b2) / det;
  double c2 = (s11 * b2 - s12 * b1) / det;
  return std::max(0.0, syy - c1 * b1 - c2 * b2);
}

std::vector<double> grid_or_default(const std::vector<double>& grid, double lo, double hi,
                                    double step) {
  if (!grid.empty()) return grid;
  std::vector<double> out;
  for (double v = lo; v <= hi + 1e-9; v += step) out.push_back(v);
  return out;
}

}  // namespace

TdParams fit_td(const std::vector<LaneChangeEvent>& events, const DesiredSpeedCurve& curve,
                const TdGrid& grid) {
  check_events_nonempty(events, "fit_td");
  std::vector<double> r1, r2, y;
  for (const auto& e : events)
    for (std::size_t i = 0; i < e.t.size(); ++i) {
      r1.push_back(desired_speed(curve, e.s_EL[i]) - e.v_E[i]);
      r2.push_back(e.v_L[i] - e.v_E[i]);
      y.push_back(e.a_E[i]);
    }
  double sse_one = regression_sse(r1, r2, y);

  std::vector<double> t_grid = grid_or_default(grid.T_des, 0.6, 2.0, 0.1);
  std::vector<double> d_grid = grid_or_default(grid.delta, 0.0, 0.60, 0.05);
  double best_score = -1.0;
  TdParams best{1.0, 0.0, grid.zeta, grid.threshold};
  bool found = false;
  for (double T_des : t_grid) {
    for (double delta : d_grid) {
      TdParams cand{T_des, delta, grid.zeta, grid.threshold};
      std::vector<double> r1m[2], r2m[2], ym[2];
      std::size_t row = 0;
      for (const auto& e : events) {
        std::vector<int> labels = td_mode_labeling(cand, e.v_E, e.s_EL);
        for (std::size_t i = 0; i < labels.size(); ++i, ++row) {
          int k = labels[i] - 1;
          r1m[k].push_back(r1[row]);
          r2m[k].push_back(r2[row]);
          ym[k].push_back(y[row]);
        }
      }
      if (ym[0].size() < static_cast<std::size_t>(grid.min_mode_samples) ||
          ym[1].size() < static_cast<std::size_t>(grid.min_mode_samples))
        continue;
      double sse_two = regression_sse(r1m[0], r2m[0], ym[0]) +
                       regression_sse(r1m[1], r2m[1], ym[1]);
      double score = sse_one > 0.0 ? 1.0 - sse_two / sse_one : 0.0;
      if (score > best_score) {
        best_score = score;
        best = cand;
        found = true;
      }
    }
  }
  if (!found)
    throw ValidationError("fit_td: no grid candidate populates both modes; widen the grids");
  return best;
}

RateEstimate calibrate_rates(const std::vector<LaneChangeEvent>& events, const TdParams& td) {
  check_events_nonempty(events, "calibrate_rates");
  RateEstimate est;
  for (const auto& e : events) {
    std::vector<int> labels = td_mode_labeling(td, e.v_E, e.s_EL);
    double dt = e.t[1] - e.t[0];
    int prev = 0;  // transitions never bridge event boundaries
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == 1)
        est.T1 += dt;
      else
        est.T2 += dt;
      if (prev == 1 && labels[i] == 2) ++est.n12;
      if (prev == 2 && labels[i] == 1) ++est.n21;
      prev = labels[i];
    }
  }
  if (!(est.T1 > 0.0)) throw ValidationError("calibrate_rates: mode 1 never observed");
  if (!(est.T2 > 0.0)) throw ValidationError("calibrate_rates: mode 2 never observed");
  est.lambda12 = est.n12 / est.T1;
  est.lambda21 = est.n21 / est.T2;
  return est;
}

CompletionCriterion extract_thresholds(const std::vector<LaneChangeEvent>& events, double tau) {
  if (events.empty()) throw ValidationError("extract_thresholds: no events");
  double rear = events.front().rear_gap_at_cross;
  double front = events.front().front_gap_at_cross;
  for (const auto& e : events) {
    rear = std::min(rear, e.rear_gap_at_cross);
    front = std::min(front, e.front_gap_at_cross);
  }
  CompletionCriterion c{tau, rear, front};
  c.validate();
  return c;
}

CalibrationResult calibrate(const std::vector<LaneChangeEvent>& events,
                            const CalibOptions& opts) {
  check_events_nonempty(events, "calibrate");

  // Preliminary single-mode driver fit pins down the desired-speed curve for
  // the TD grid search.
  std::vector<std::vector<int>> ones;
  ones.reserve(events.size());
  for (const auto& e : events) ones.emplace_back(e.t.size(), 1);
  DriverModel pre_guess = opts.driver_guess;
  pre_guess.a2 = pre_guess.a1;
  pre_guess.b2 = pre_guess.b1;
  auto [pre, pre_diag] = fit_driver(events, ones, pre_guess, opts.driver_lo, opts.driver_hi,
                                    opts.fit);
  (void)pre_diag;

  TdParams td = fit_td(events, pre.curve, opts.td_grid);
  std::vector<std::vector<int>> labels;
  labels.reserve(events.size());
  for (const auto& e : events) labels.push_back(td_mode_labeling(td, e.v_E, e.s_EL));

  DriverModel seeded{pre.a1, pre.b1, pre.a1, pre.b1, pre.curve};
  auto [driver, ddiag] = fit_driver(events, labels, seeded, opts.driver_lo, opts.driver_hi,
                                    opts.fit);
  auto [follower, fdiag] = fit_follower(events, opts.follower_guess, opts.follower_lo,
                                        opts.follower_hi, opts.fit);
  RateEstimate rates = calibrate_rates(events, td);

  CalibrationResult r;
  r.driver = driver;
  r.follower = follower;
  r.rates = ModeRates{rates.lambda12, rates.lambda21};
  r.rates.validate();
  r.td = td;
  r.thresholds = extract_thresholds(events);
  r.driver_residual = ddiag.residual;
  r.follower_residual = fdiag.residual;
  r.driver_converged = ddiag.converged;
  r.follower_converged = fdiag.converged;
  return r;
}

json calibration_to_json(const CalibrationResult& r) {
  json j;
  j["driver"] = {{"a1", r.driver.a1},
                 {"b1", r.driver.b1},
                 {"a2", r.driver.a2},
                 {"b2", r.driver.b2},
                 {"v_max", r.driver.curve.v_max},
                 {"s_st", r.driver.curve.s_st},
                 {"s_go", r.driver.curve.s_go}};
  j["follower"] = {{"a", r.follower.a},
                   {"b", r.follower.b},
                   {"v_max", r.follower.curve.v_max},
                   {"s_st", r.follower.curve.s_st},
                   {"s_go", r.follower.curve.s_go}};
  j["rates"] = {{"lambda12", r.rates.lambda12}, {"lambda21", r.rates.lambda21}};
  j["td"] = {{"T_des", r.td.T_des},
             {"delta", r.td.delta},
             {"zeta", r.td.zeta},
             {"threshold", r.td.threshold}};
  j["thresholds"] = {{"tau", r.thresholds.tau},
                     {"s_rear_thr", r.thresholds.s_rear_thr},
                     {"s_front_thr", r.thresholds.s_front_thr}};
  j["fit"] = {{"driver_residual", r.driver_residual},
              {"driver_converged", r.driver_converged},
              {"follower_residual", r.follower_residual},
              {"follower_converged", r.follower_converged}};
  return j;
}

}  // namespace lcshare
